"""Checkpoint persistence: metric snapshot plus hashed stage artifacts.

A checkpoint is emitted at every periodic exit and at the true exit. It
lives under ``workdir/checkpoints/<revolution>-<kind>/`` as a manifest plus
copies of the stage output directories. Artifact digests are pure content
hashes, so identical runs produce identical digests.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import CheckpointNotTrue, UnknownRun

PERIODIC = "periodic"
TRUE = "true"

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Checkpoint:
    checkpoint_id: str
    run_id: str
    revolution: int
    kind: str
    snapshot: dict
    artifact_digests: dict[str, str]
    created_at: str

    @property
    def digest(self) -> str:
        return checkpoint_digest(self.revolution, self.kind, self.snapshot, self.artifact_digests)

    def to_json(self) -> dict:
        return {
            "checkpoint_id": self.checkpoint_id,
            "run_id": self.run_id,
            "revolution": self.revolution,
            "kind": self.kind,
            "snapshot": self.snapshot,
            "artifact_digests": self.artifact_digests,
            "created_at": self.created_at,
        }

    @staticmethod
    def from_json(doc: Mapping) -> "Checkpoint":
        return Checkpoint(
            checkpoint_id=doc["checkpoint_id"],
            run_id=doc["run_id"],
            revolution=doc["revolution"],
            kind=doc["kind"],
            snapshot=dict(doc["snapshot"]),
            artifact_digests=dict(doc["artifact_digests"]),
            created_at=doc["created_at"],
        )


def checkpoint_digest(
    revolution: int, kind: str, snapshot: Mapping, artifact_digests: Mapping[str, str]
) -> str:
    # created_at and run_id are excluded: the digest must be reproducible
    # across identical runs.
    basis = {
        "revolution": revolution,
        "kind": kind,
        "snapshot": dict(snapshot),
        "artifact_digests": dict(artifact_digests),
    }
    canonical = json.dumps(basis, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def hash_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_directory(path: Path) -> str:
    """Content hash over (relative path, file hash) pairs in sorted order."""
    entries = []
    for file in sorted(p for p in path.rglob("*") if p.is_file()):
        entries.append(f"{file.relative_to(path).as_posix()}:{hash_file(file)}")
    basis = "\n".join(entries)
    return hashlib.sha256(basis.encode("utf-8")).hexdigest()


def checkpoint_dir(workdir: str | Path, revolution: int, kind: str) -> Path:
    return Path(workdir) / "checkpoints" / f"{revolution}-{kind}"


def write_checkpoint(
    checkpoint: Checkpoint, workdir: str | Path, artifact_dirs: Mapping[str, Path]
) -> Path:
    """Persist manifest plus artifact copies. Overwrites a half-written
    directory left behind by a crash; the caller guards real double emits."""
    target = checkpoint_dir(workdir, checkpoint.revolution, checkpoint.kind)
    if target.exists():
        shutil.rmtree(target)
    target.mkdir(parents=True)
    for stage_name, source in sorted(artifact_dirs.items()):
        if source.is_dir():
            shutil.copytree(source, target / "artifacts" / stage_name)
    (target / MANIFEST_NAME).write_text(
        json.dumps(checkpoint.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return target


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint from its directory (or its manifest file directly)."""
    path = Path(path)
    manifest = path / MANIFEST_NAME if path.is_dir() else path
    if not manifest.exists():
        raise UnknownRun(f"no checkpoint manifest at {manifest}")
    return Checkpoint.from_json(json.loads(manifest.read_text(encoding="utf-8")))


def list_checkpoints(workdir: str | Path) -> list[Checkpoint]:
    root = Path(workdir) / "checkpoints"
    if not root.is_dir():
        return []
    found = []
    for sub in sorted(root.iterdir()):
        manifest = sub / MANIFEST_NAME
        if manifest.exists():
            found.append(load_checkpoint(sub))
    found.sort(key=lambda c: (c.revolution, c.kind))
    return found


def latest_true_checkpoint(workdir: str | Path) -> Checkpoint:
    candidates = [c for c in list_checkpoints(workdir) if c.kind == TRUE]
    if not candidates:
        raise CheckpointNotTrue(f"no true checkpoint under {workdir}")
    return candidates[-1]

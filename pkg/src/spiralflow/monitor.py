"""Post-deployment drift watcher.

Scans an ordered stream of metric observations against a degradation gate.
The first satisfying observation produces a re-entry signal; a new run can
then be seeded from the last true checkpoint of the finished run. Watching
is a pure fold over the stream, so it can live in a long-running process
that talks to the engine only through files:

    python -m spiralflow.monitor observations.jsonl --workdir runs/turnover
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .checkpoints import Checkpoint, TRUE, latest_true_checkpoint
from .engine import RunState, start_run
from .errors import CheckpointNotTrue, MalformedObservation, MissingMetricError
from .gates import Gate, SATISFIED, evaluate_gate, gate_from_json, gate_to_json
from .specs import ValidatedSpec, snapshot_from_json

SIGNAL_FILENAME = "reentry-signal.json"


@dataclass(frozen=True)
class Observation:
    """One scoring report from the deployed model, e.g. a monthly AUC."""

    metrics: dict[str, float]
    observed_at: str | None = None

    def __post_init__(self):
        if not self.metrics:
            raise MalformedObservation("observation carries no metrics")

    def to_json(self) -> dict:
        doc: dict = {"metrics": dict(self.metrics)}
        if self.observed_at is not None:
            doc["observed_at"] = self.observed_at
        return doc

    @staticmethod
    def from_json(doc) -> "Observation":
        if not isinstance(doc, dict) or not isinstance(doc.get("metrics"), dict):
            raise MalformedObservation(f"expected {{'metrics': {{...}}}}, got {doc!r}")
        return Observation(dict(doc["metrics"]), doc.get("observed_at"))


@dataclass(frozen=True)
class ReentrySignal:
    triggered_by: Observation
    gate: Gate
    source_checkpoint: str | None = None

    def to_json(self) -> dict:
        return {
            "triggered_by": self.triggered_by.to_json(),
            "gate": gate_to_json(self.gate),
            "source_checkpoint": self.source_checkpoint,
        }

    @staticmethod
    def from_json(doc: dict) -> "ReentrySignal":
        return ReentrySignal(
            Observation.from_json(doc["triggered_by"]),
            gate_from_json(doc["gate"]),
            doc.get("source_checkpoint"),
        )


def watch(
    observations: Iterable[Observation],
    reentry_gate: Gate,
    source_checkpoint: str | None = None,
) -> ReentrySignal | None:
    """Return a signal for the first observation satisfying the gate.

    Raises MissingMetricError when an observation lacks a metric the gate
    reads; a degradation gate that silently never fires would be worse
    than a loud mismatch.
    """
    for observation in observations:
        outcome = evaluate_gate(reentry_gate, observation.metrics)
        if outcome.kind == "missing-metric":
            raise MissingMetricError(outcome.missing_metric)
        if outcome.kind == SATISFIED:
            return ReentrySignal(observation, reentry_gate, source_checkpoint)
    return None


def reenter(spec: ValidatedSpec, source: Checkpoint, workdir: str | Path) -> RunState:
    """Start a fresh run seeded from a true checkpoint's metric snapshot.

    The old run is never mutated; the new ledger's RunStarted event records
    the source checkpoint id, and the seeded metrics (e.g. the delivered
    model's auc) are the new run's baseline.
    """
    if source.kind != TRUE:
        raise CheckpointNotTrue(
            f"re-entry requires a true checkpoint, got {source.kind!r}"
        )
    return start_run(
        spec,
        workdir,
        source_checkpoint=source.checkpoint_id,
        seeded_snapshot=snapshot_from_json(source.snapshot),
    )


# ---------------------------------------------------------------------------
# File plumbing: JSON Lines in, reentry-signal.json out.
# ---------------------------------------------------------------------------

def load_observations(path: str | Path) -> list[Observation]:
    observations = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedObservation(f"{path}:{lineno}: {exc}") from exc
            observations.append(Observation.from_json(doc))
    return observations


def write_signal(signal: ReentrySignal, directory: str | Path) -> Path:
    target = Path(directory) / SIGNAL_FILENAME
    target.write_text(
        json.dumps(signal.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return target


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m spiralflow.monitor",
        description="Watch an observation stream for drift and signal re-entry.",
    )
    parser.add_argument("observations", help="JSON Lines file, one observation per line")
    parser.add_argument(
        "--workdir",
        required=True,
        help="finished run directory; its reentry gate and true checkpoint are used",
    )
    parser.add_argument(
        "--signal-dir",
        default=None,
        help="where to write reentry-signal.json (default: the workdir)",
    )
    args = parser.parse_args(argv)

    from .engine import resume  # deferred: engine already imports nothing from here

    state = resume(args.workdir)
    if state.spec.reentry_gate is None:
        print("spec declares no reentry gate; nothing to watch", file=sys.stderr)
        return 1
    checkpoint = latest_true_checkpoint(args.workdir)
    stream = load_observations(args.observations)
    signal = watch(stream, state.spec.reentry_gate, checkpoint.checkpoint_id)
    if signal is None:
        print("stream ended without satisfying the reentry gate")
        return 0
    target = write_signal(signal, args.signal_dir or args.workdir)
    print(f"reentry signal written to {target}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

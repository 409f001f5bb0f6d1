"""Pluggable stage executors.

Three runner kinds: an external command (metrics cross the process boundary
via a JSON file named in SPIRAL_METRICS_FILE), a deterministic simulated
runner scripted per revolution, and an incremental CSV merge that unions
weekly files into one accumulated dataset with a keep-latest conflict rule.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from .errors import (
    DuplicateKeysWithinIncoming,
    EmitsContractViolation,
    HeaderMismatch,
    IncomingMissing,
    MetricsFileMalformed,
    MetricsFileMissing,
    NonZeroExit,
    ScriptExhausted,
    StageTimeout,
)
from .specs import Command, Merge, RunnerBinding, Simulated, StageSpec

MERGE_METRICS = ("rows_incoming", "rows_total", "rows_replaced")


@dataclass(frozen=True)
class StageContext:
    """Everything a runner may need about the stage invocation."""

    run_id: str
    stage: str
    revolution: int
    workdir: Path
    output_dir: Path
    metrics_file: Path


@dataclass(frozen=True)
class StageResult:
    metrics: dict[str, float]
    output_dir: Path | None
    duration: float


def stage_output_dir(workdir: str | Path, stage: str) -> Path:
    return Path(workdir) / "stages" / stage


def make_context(run_id: str, stage: str, revolution: int, workdir: str | Path) -> StageContext:
    # Absolute paths: the command runner changes cwd, so anything handed to
    # a subprocess through the environment must not be cwd-relative.
    workdir = Path(workdir).resolve()
    return StageContext(
        run_id=run_id,
        stage=stage,
        revolution=revolution,
        workdir=workdir,
        output_dir=stage_output_dir(workdir, stage),
        metrics_file=workdir / "tmp" / f"{stage}.metrics.json",
    )


def run_command_stage(binding: Command, ctx: StageContext) -> StageResult:
    """Run an external command and read its metrics file.

    The subprocess sees SPIRAL_RUN_ID, SPIRAL_REVOLUTION, SPIRAL_STAGE,
    SPIRAL_OUTPUT_DIR and SPIRAL_METRICS_FILE. On exit code 0 the metrics
    file must contain a flat JSON object of name -> number.
    """
    if not binding.argv:
        raise NonZeroExit(-1, "empty argv")
    ctx.output_dir.mkdir(parents=True, exist_ok=True)
    ctx.metrics_file.parent.mkdir(parents=True, exist_ok=True)
    if ctx.metrics_file.exists():
        ctx.metrics_file.unlink()

    env = dict(os.environ)
    env.update(binding.env)
    env.update(
        {
            "SPIRAL_RUN_ID": ctx.run_id,
            "SPIRAL_REVOLUTION": str(ctx.revolution),
            "SPIRAL_STAGE": ctx.stage,
            "SPIRAL_OUTPUT_DIR": str(ctx.output_dir),
            "SPIRAL_METRICS_FILE": str(ctx.metrics_file),
        }
    )
    started = time.monotonic()
    try:
        proc = subprocess.run(
            list(binding.argv),
            cwd=str(ctx.workdir),
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            timeout=binding.timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise StageTimeout(binding.timeout) from exc
    duration = time.monotonic() - started
    if proc.returncode != 0:
        tail = proc.stderr.decode("utf-8", errors="replace")[-1000:]
        raise NonZeroExit(proc.returncode, tail)
    metrics = _read_metrics_file(ctx.metrics_file)
    return StageResult(metrics=metrics, output_dir=ctx.output_dir, duration=duration)


def _read_metrics_file(path: Path) -> dict[str, float]:
    if not path.exists():
        raise MetricsFileMissing(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MetricsFileMalformed(path, str(exc)) from exc
    if not isinstance(doc, dict):
        raise MetricsFileMalformed(path, "top level must be a JSON object")
    metrics: dict[str, float] = {}
    for name, value in doc.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MetricsFileMalformed(path, f"value of {name!r} is not a number")
        metrics[str(name)] = float(value)
    return metrics


def run_simulated_stage(
    binding: Simulated, revolution: int, output_dir: Path | None = None
) -> StageResult:
    """Deterministic scripted metrics: series value at index revolution - 1."""
    started = time.monotonic()
    metrics: dict[str, float] = {}
    for name, series in sorted(binding.script.items()):
        if revolution > len(series):
            raise ScriptExhausted(revolution)
        metrics[name] = float(series[revolution - 1])
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        (output_dir / "metrics.json").write_text(
            json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return StageResult(metrics=metrics, output_dir=output_dir, duration=time.monotonic() - started)


def run_merge_stage(
    binding: Merge, revolution: int, workdir: str | Path, output_dir: Path | None = None
) -> StageResult:
    """Union this revolution's incoming CSV into the accumulated dataset.

    Rows are keyed by the key-column tuple; an incoming row replaces an
    existing one with the same key (keep-latest). The accumulated file is
    rewritten atomically with rows sorted by key tuple, which keeps the
    output byte-stable and merge idempotent.
    """
    workdir = Path(workdir)
    started = time.monotonic()
    incoming_path = workdir / binding.incoming_pattern.format(revolution=revolution)
    if not incoming_path.exists():
        raise IncomingMissing(incoming_path)

    header, incoming_rows = _read_csv(incoming_path)
    missing_cols = [c for c in binding.key_columns if c not in header]
    if missing_cols:
        raise HeaderMismatch(f"incoming file lacks key columns {missing_cols}")

    key_idx = [header.index(c) for c in binding.key_columns]

    def key_of(row: list[str]) -> tuple[str, ...]:
        return tuple(row[i] for i in key_idx)

    seen: set[tuple[str, ...]] = set()
    dupes: list[tuple[str, ...]] = []
    for row in incoming_rows:
        k = key_of(row)
        if k in seen:
            dupes.append(k)
        seen.add(k)
    if dupes:
        raise DuplicateKeysWithinIncoming(dupes)

    accumulated_path = workdir / binding.accumulated
    if accumulated_path.exists():
        acc_header, acc_rows = _read_csv(accumulated_path)
        if acc_header != header:
            raise HeaderMismatch(
                f"accumulated header {acc_header} != incoming header {header}"
            )
    else:
        acc_rows = []

    merged: dict[tuple[str, ...], list[str]] = {key_of(r): r for r in acc_rows}
    rows_replaced = sum(1 for r in incoming_rows if key_of(r) in merged)
    for row in incoming_rows:
        merged[key_of(row)] = row

    ordered = [merged[k] for k in sorted(merged)]
    _write_csv_atomic(accumulated_path, header, ordered)

    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(accumulated_path, output_dir / accumulated_path.name)

    metrics = {
        "rows_incoming": float(len(incoming_rows)),
        "rows_total": float(len(ordered)),
        "rows_replaced": float(rows_replaced),
    }
    return StageResult(metrics=metrics, output_dir=output_dir, duration=time.monotonic() - started)


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch(f"{path} has no header row") from None
        rows = [row for row in reader if row]
    return header, rows


def _write_csv_atomic(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


class RunnerRegistry:
    """Dispatch from binding type to runner, plus emits-contract enforcement."""

    def __init__(self, overrides: Mapping[type, Callable] | None = None):
        self._runners: dict[type, Callable[[RunnerBinding, StageContext], StageResult]] = {
            Command: lambda b, ctx: run_command_stage(b, ctx),
            Simulated: lambda b, ctx: run_simulated_stage(
                b, ctx.revolution, output_dir=ctx.output_dir
            ),
            Merge: lambda b, ctx: run_merge_stage(
                b, ctx.revolution, ctx.workdir, output_dir=ctx.output_dir
            ),
        }
        if overrides:
            self._runners.update(overrides)

    def execute(self, stage: StageSpec, ctx: StageContext) -> StageResult:
        runner = self._runners.get(type(stage.runner))
        if runner is None:
            raise TypeError(f"no runner registered for {type(stage.runner).__name__}")
        result = runner(stage.runner, ctx)
        declared = set(stage.emits)
        produced = set(result.metrics)
        if declared != produced:
            raise EmitsContractViolation(
                missing=declared - produced, extra=produced - declared
            )
        return result


def default_registry() -> RunnerRegistry:
    return RunnerRegistry()

"""Exception types shared across the package."""

from __future__ import annotations


class SpiralError(Exception):
    """Base class for all errors raised by this package."""


class SpecValidationError(SpiralError):
    """A spec document failed validation; carries the full error list."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(str(e) for e in self.errors)
        super().__init__(f"invalid spec: {lines}")


class InvalidArithmetic(SpiralError):
    """Flag-count arithmetic called outside its domain."""


class MissingMetricError(SpiralError):
    """A gate referenced a metric absent from the snapshot."""

    def __init__(self, metric: str):
        self.metric = metric
        super().__init__(f"metric {metric!r} missing from snapshot")


class ManualDecisionRequired(SpiralError):
    """A flag needs an operator decision before the run can proceed."""

    def __init__(self, context: dict | None = None):
        self.context = context or {}
        super().__init__("flag requires a manual decision")


class InvalidDecision(SpiralError):
    """The supplied flag decision is not applicable in the current state."""


class InvalidTraverseTarget(SpiralError):
    """Traverse-back named a stage that does not exist in the spec."""

    def __init__(self, target: str):
        self.target = target
        super().__init__(f"no stage named {target!r}")


class WorkdirNotEmpty(SpiralError):
    """start_run refused a workdir that already contains files."""


class UnknownRun(SpiralError):
    """No run (or the wrong run) lives at the given location."""


class NotAwaitingFlag(SpiralError):
    """resolve was called but the run is not waiting on a flag."""


class RunNotActive(SpiralError):
    """run_revolution was called on a run that already stopped."""


class CorruptLedger(SpiralError):
    """The ledger has a sequence gap or an unparseable line."""

    def __init__(self, message: str, sequence: int | None = None):
        self.sequence = sequence
        super().__init__(message)


class CheckpointExists(SpiralError):
    """A checkpoint for this revolution and kind was already emitted."""


class CheckpointNotTrue(SpiralError):
    """Re-entry requires a true checkpoint, not a periodic one."""


class LockBusy(SpiralError):
    """Another executor holds the run's exclusive lock."""


class MalformedObservation(SpiralError):
    """An observation-stream line is not a valid observation."""


# ---------------------------------------------------------------------------
# Stage runner failures. The engine turns any of these into a StageFailed
# ledger event and a Failed run status.
# ---------------------------------------------------------------------------

class StageExecutionError(SpiralError):
    """Base class for failures inside a stage runner."""


class NonZeroExit(StageExecutionError):
    def __init__(self, code: int, stderr_tail: str):
        self.code = code
        self.stderr_tail = stderr_tail
        super().__init__(f"command exited with code {code}: {stderr_tail.strip()[-200:]}")


class StageTimeout(StageExecutionError):
    def __init__(self, seconds: float):
        self.seconds = seconds
        super().__init__(f"command exceeded timeout of {seconds}s")


class MetricsFileMissing(StageExecutionError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"metrics file not written: {path}")


class MetricsFileMalformed(StageExecutionError):
    def __init__(self, path, why: str):
        self.path = path
        super().__init__(f"metrics file {path} malformed: {why}")


class EmitsContractViolation(StageExecutionError):
    def __init__(self, missing=(), extra=()):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        parts = []
        if self.missing:
            parts.append(f"missing={self.missing}")
        if self.extra:
            parts.append(f"extra={self.extra}")
        super().__init__("stage metrics do not match emits list: " + ", ".join(parts))


class ScriptExhausted(StageExecutionError):
    def __init__(self, revolution: int):
        self.revolution = revolution
        super().__init__(f"simulated script has no value for revolution {revolution}")


class IncomingMissing(StageExecutionError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"incoming file not found: {path}")


class HeaderMismatch(StageExecutionError):
    def __init__(self, why: str):
        super().__init__(f"csv header mismatch: {why}")


class DuplicateKeysWithinIncoming(StageExecutionError):
    def __init__(self, keys):
        self.keys = list(keys)
        super().__init__(f"incoming file repeats key tuples: {self.keys[:5]}")

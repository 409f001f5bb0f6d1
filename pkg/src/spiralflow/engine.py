"""Run executor: an event-sourced state machine over the ledger.

Every state change goes through ``apply_event``, the same pure transition
the replay path uses, so the in-memory state and ``replay(ledger)`` agree
after every single event. The executor performs side effects (run a stage,
write a checkpoint), appends the event, then applies it.

Crash recovery falls out of this design: ``resume`` replays the ledger and
the executor finishes whatever the last event left half-applied. Stage
runners must be idempotent with respect to their output directory; the
engine deletes a stage's output directory before (re-)running it.
"""

from __future__ import annotations

import shutil
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from filelock import FileLock, Timeout

from . import checkpoints as cp
from . import ledger as lg
from .errors import (
    CheckpointExists,
    CorruptLedger,
    InvalidDecision,
    InvalidTraverseTarget,
    LockBusy,
    ManualDecisionRequired,
    MissingMetricError,
    NotAwaitingFlag,
    RunNotActive,
    StageExecutionError,
    UnknownRun,
    WorkdirNotEmpty,
)
from .flags import (
    CONTINUE,
    FORCED_EXIT,
    PERIODIC_EXIT,
    TRAVERSE_BACK,
    TRUE_EXIT,
    FlagDecision,
    decide_flag,
)
from .gates import GateOutcome, evaluate_gate, gate_to_text, manual_prompts
from .runners import RunnerRegistry, default_registry, make_context, stage_output_dir
from .specs import (
    MetricSnapshot,
    MetricValue,
    ValidatedSpec,
    ensure_valid,
    snapshot_from_json,
    snapshot_to_json,
    snapshot_values,
    spec_digest,
    spec_from_json,
    spec_to_json,
)

RUNNING = "Running"
AWAITING_FLAG = "AwaitingFlag"
EXITED_TRUE = "ExitedTrue"
EXITED_FORCED = "ExitedForced"
FAILED = "Failed"

TERMINAL_STATUSES = (EXITED_TRUE, EXITED_FORCED, FAILED)

LOCK_FILENAME = ".executor.lock"
LOCK_TIMEOUT = 30.0

REVOLUTION_INDEX = "revolution_index"


@dataclass
class RunState:
    """Full run state; every field is reconstructed by ledger replay."""

    run_id: str
    spec: ValidatedSpec
    spec_digest: str
    workdir: Path
    revolution: int = 1
    stage_cursor: int = 0
    snapshot: MetricSnapshot = field(default_factory=dict)
    status: str = RUNNING
    # Mid-revolution bookkeeping, used to finish half-applied work on resume.
    revolution_open: bool = False
    executing_stage: str | None = None
    flag_payload: dict | None = None
    awaiting_context: dict | None = None
    pending_decision: FlagDecision | None = None
    pending_checkpoint_done: bool = False
    emitted_checkpoints: list[tuple[int, str]] = field(default_factory=list)
    failure: dict | None = None
    exit_kind: str | None = None
    last_sequence: int = 0

    @property
    def is_terminal(self) -> bool:
        return self.status in TERMINAL_STATUSES

    def gate_view(self) -> dict[str, float]:
        view = snapshot_values(self.snapshot)
        view[REVOLUTION_INDEX] = self.revolution
        return view

    def periodic_checkpoint_count(self) -> int:
        return sum(1 for _, kind in self.emitted_checkpoints if kind == cp.PERIODIC)

    def true_checkpoint_count(self) -> int:
        return sum(1 for _, kind in self.emitted_checkpoints if kind == cp.TRUE)

    def summary(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "revolution": self.revolution,
            "periodic_checkpoints": self.periodic_checkpoint_count(),
            "true_checkpoints": self.true_checkpoint_count(),
            "workdir": str(self.workdir),
        }


def state_fingerprint(state: RunState) -> dict:
    """Canonical view of a RunState, used to compare live state vs replay."""
    return {
        "run_id": state.run_id,
        "spec_digest": state.spec_digest,
        "revolution": state.revolution,
        "stage_cursor": state.stage_cursor,
        "snapshot": snapshot_to_json(state.snapshot),
        "status": state.status,
        "revolution_open": state.revolution_open,
        "executing_stage": state.executing_stage,
        "flag_payload": state.flag_payload,
        "pending_decision": state.pending_decision.to_json() if state.pending_decision else None,
        "pending_checkpoint_done": state.pending_checkpoint_done,
        "emitted_checkpoints": list(state.emitted_checkpoints),
        "failure": state.failure,
        "exit_kind": state.exit_kind,
        "last_sequence": state.last_sequence,
    }


# ---------------------------------------------------------------------------
# The transition function. Replay and live execution both go through here.
# ---------------------------------------------------------------------------

def apply_event(state: RunState, event: lg.LedgerEvent) -> RunState:
    kind, payload = event.kind, event.payload

    if kind == lg.RUN_STARTED:
        raise CorruptLedger("RunStarted after sequence 1", sequence=event.sequence)

    elif kind == lg.REVOLUTION_STARTED:
        if payload["revolution"] != state.revolution:
            raise CorruptLedger(
                f"RevolutionStarted for {payload['revolution']} while at {state.revolution}",
                sequence=event.sequence,
            )
        state.revolution_open = True
        state.flag_payload = None

    elif kind == lg.STAGE_STARTED:
        state.executing_stage = payload["stage"]

    elif kind == lg.STAGE_COMPLETED:
        stage = payload["stage"]
        for name, value in payload["metrics"].items():
            state.snapshot[name] = MetricValue(value, stage, payload["revolution"])
        state.stage_cursor = _stage_index(state.spec, stage) + 1
        state.executing_stage = None

    elif kind == lg.STAGE_FAILED:
        state.status = FAILED
        state.failure = {"stage": payload.get("stage"), "cause": payload["cause"]}
        state.executing_stage = None

    elif kind == lg.FLAG_EVALUATED:
        state.flag_payload = payload
        outcomes = _outcomes_from_payload(payload)
        try:
            decide_flag(*outcomes, state.revolution, state.spec.max_revolutions)
        except ManualDecisionRequired:
            state.status = AWAITING_FLAG
            state.awaiting_context = payload
        except MissingMetricError:
            pass  # a StageFailed event follows

    elif kind == lg.FLAG_RESOLVED:
        decision = FlagDecision.from_json(payload["decision"])
        state.status = RUNNING
        state.awaiting_context = None
        if decision.kind == CONTINUE:
            _advance(state, cursor=0)
        else:
            state.pending_decision = decision
            state.pending_checkpoint_done = False

    elif kind == lg.CHECKPOINT_EMITTED:
        mark = (payload["revolution"], payload["kind"])
        state.emitted_checkpoints.append(mark)
        pending = state.pending_decision
        if pending and pending.kind == PERIODIC_EXIT and payload["kind"] == cp.PERIODIC:
            state.pending_decision = None
            _advance(state, cursor=0)
        elif pending and pending.kind == TRUE_EXIT and payload["kind"] == cp.TRUE:
            state.pending_checkpoint_done = True

    elif kind == lg.TRAVERSED_BACK:
        target = payload["target"]
        state.pending_decision = None
        _advance(state, cursor=_stage_index(state.spec, target))

    elif kind == lg.RUN_EXITED:
        state.exit_kind = payload["kind"]
        state.status = EXITED_TRUE if payload["kind"] == "true" else EXITED_FORCED
        state.pending_decision = None

    else:
        raise CorruptLedger(f"unknown event kind {kind!r}", sequence=event.sequence)

    state.last_sequence = event.sequence
    return state


def _advance(state: RunState, cursor: int) -> None:
    # The spiral only moves forward; even a traverse-back costs a revolution.
    if state.revolution + 1 > state.spec.max_revolutions:
        raise CorruptLedger(
            f"revolution would exceed budget {state.spec.max_revolutions}"
        )
    state.revolution += 1
    state.stage_cursor = cursor
    state.revolution_open = False
    state.flag_payload = None


def _stage_index(spec: ValidatedSpec, name: str) -> int:
    for i, stage in enumerate(spec.stages):
        if stage.name == name:
            return i
    raise CorruptLedger(f"event references unknown stage {name!r}")


def _outcomes_from_payload(payload: dict) -> tuple[GateOutcome, GateOutcome, GateOutcome]:
    outcomes = payload["outcomes"]
    return (
        GateOutcome.from_json(outcomes["true_exit"]),
        GateOutcome.from_json(outcomes["periodic_exit"]),
        GateOutcome.from_json(outcomes["flag"]),
    )


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def replay_events(events: Iterable[lg.LedgerEvent], workdir: str | Path) -> RunState:
    """Reconstruct RunState by pure replay; no filesystem access."""
    events = list(events)
    if not events or events[0].kind != lg.RUN_STARTED:
        raise CorruptLedger("ledger must begin with RunStarted", sequence=1)
    state = _state_from_run_started(events[0], Path(workdir))
    for event in events[1:]:
        apply_event(state, event)
    return state


def _state_from_run_started(event: lg.LedgerEvent, workdir: Path) -> RunState:
    payload = event.payload
    spec = ensure_valid(spec_from_json(payload["spec"]))
    snapshot = snapshot_from_json(payload.get("seeded_snapshot", {}))
    state = RunState(
        run_id=payload["run_id"],
        spec=spec,
        spec_digest=payload["spec_digest"],
        workdir=workdir,
        snapshot=snapshot,
    )
    state.last_sequence = event.sequence
    return state


def resume(workdir: str | Path, run_id: str | None = None) -> RunState:
    """Rebuild the state of the run living at ``workdir`` from its ledger."""
    path = lg.ledger_path(workdir)
    if not path.exists():
        raise UnknownRun(f"no ledger at {path}")
    events = lg.read_ledger(path)
    state = replay_events(events, workdir)
    if run_id is not None and state.run_id != run_id:
        raise UnknownRun(f"workdir holds run {state.run_id!r}, not {run_id!r}")
    return state


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _executor_lock(workdir: Path) -> FileLock:
    return FileLock(str(Path(workdir) / LOCK_FILENAME))


def start_run(
    spec: ValidatedSpec,
    workdir: str | Path,
    run_id: str | None = None,
    source_checkpoint: str | None = None,
    seeded_snapshot: MetricSnapshot | None = None,
) -> RunState:
    """Create the workdir and ledger; the run starts at revolution 1."""
    workdir = Path(workdir)
    if workdir.exists() and any(workdir.iterdir()):
        raise WorkdirNotEmpty(f"{workdir} is not empty")
    workdir.mkdir(parents=True, exist_ok=True)

    run_id = run_id or f"run-{uuid.uuid4().hex[:12]}"
    payload = {
        "run_id": run_id,
        "spec": spec_to_json(spec),
        "spec_digest": spec_digest(spec),
    }
    if source_checkpoint is not None:
        payload["source_checkpoint"] = source_checkpoint
    if seeded_snapshot:
        payload["seeded_snapshot"] = snapshot_to_json(seeded_snapshot)

    lock = _acquire(workdir)
    try:
        writer = lg.LedgerWriter(lg.ledger_path(workdir))
        event = writer.append(lg.RUN_STARTED, payload)
    finally:
        lock.release()
    return _state_from_run_started(event, workdir)


def _acquire(workdir: Path):
    lock = _executor_lock(workdir)
    try:
        lock.acquire(timeout=LOCK_TIMEOUT)
    except Timeout as exc:
        raise LockBusy(f"another executor holds the lock for {workdir}") from exc
    return lock


class _Executor:
    """Drives one run: appends an event, applies it, performs side effects."""

    def __init__(self, state: RunState, registry: RunnerRegistry):
        self.state = state
        self.registry = registry
        self.writer = lg.LedgerWriter(lg.ledger_path(state.workdir), state.last_sequence + 1)

    def record(self, kind: str, payload: dict) -> None:
        event = self.writer.append(kind, payload)
        apply_event(self.state, event)

    # -- revolution ---------------------------------------------------------

    def step_revolution(self) -> RunState:
        state = self.state
        if state.pending_decision is not None:
            self.finish_pending()
            if state.status != RUNNING:
                return state
        if not state.revolution_open:
            self.record(lg.REVOLUTION_STARTED, {"revolution": state.revolution})
        if state.flag_payload is None:
            if not self.run_stages():
                return state
            self.evaluate_flag()
        if state.status != RUNNING:
            return state
        outcomes = _outcomes_from_payload(state.flag_payload)
        decision = decide_flag(*outcomes, state.revolution, state.spec.max_revolutions)
        self.record(
            lg.FLAG_RESOLVED,
            {
                "revolution": state.revolution,
                "decision": decision.to_json(),
                "resolver": "automatic",
            },
        )
        if state.pending_decision is not None:
            self.finish_pending()
        return state

    def run_stages(self) -> bool:
        """Execute remaining active stages; False when the run failed."""
        state = self.state
        i = state.stage_cursor
        while i < len(state.spec.stages):
            stage = state.spec.stages[i]
            if stage.active_from_revolution > state.revolution:
                i += 1
                continue
            ctx = make_context(state.run_id, stage.name, state.revolution, state.workdir)
            if state.executing_stage != stage.name:
                self.record(
                    lg.STAGE_STARTED, {"stage": stage.name, "revolution": state.revolution}
                )
            # Idempotent re-run contract: a stage owns its output directory.
            if ctx.output_dir.exists():
                shutil.rmtree(ctx.output_dir)
            try:
                result = self.registry.execute(stage, ctx)
            except StageExecutionError as exc:
                self.record(
                    lg.STAGE_FAILED,
                    {
                        "stage": stage.name,
                        "revolution": state.revolution,
                        "cause": str(exc),
                        "error": type(exc).__name__,
                    },
                )
                return False
            self.record(
                lg.STAGE_COMPLETED,
                {
                    "stage": stage.name,
                    "revolution": state.revolution,
                    "metrics": result.metrics,
                    "duration_s": round(result.duration, 6),
                },
            )
            i = max(i + 1, state.stage_cursor)
        return True

    def evaluate_flag(self) -> None:
        state = self.state
        spec = state.spec
        view = state.gate_view()
        outcome_map = {
            "true_exit": evaluate_gate(spec.true_exit_gate, view),
            "periodic_exit": evaluate_gate(spec.periodic_exit_gate, view),
            "flag": evaluate_gate(spec.flag_gate, view),
        }
        prompts: list[str] = []
        for name, gate in (
            ("true_exit", spec.true_exit_gate),
            ("periodic_exit", spec.periodic_exit_gate),
            ("flag", spec.flag_gate),
        ):
            if outcome_map[name].kind == "needs-manual":
                for prompt in manual_prompts(gate):
                    if prompt not in prompts:
                        prompts.append(prompt)
        payload = {
            "revolution": state.revolution,
            "outcomes": {name: o.to_json() for name, o in outcome_map.items()},
            "metrics": view,
            "gates": {
                "true_exit": gate_to_text(spec.true_exit_gate),
                "periodic_exit": gate_to_text(spec.periodic_exit_gate),
                "flag": gate_to_text(spec.flag_gate),
            },
            "prompts": prompts,
        }
        self.record(lg.FLAG_EVALUATED, payload)
        for outcome in outcome_map.values():
            if outcome.kind == "missing-metric":
                self.record(
                    lg.STAGE_FAILED,
                    {
                        "stage": None,
                        "revolution": state.revolution,
                        "cause": f"metric {outcome.missing_metric!r} missing at flag evaluation",
                        "error": "MissingMetricError",
                    },
                )
                return

    # -- decision application -----------------------------------------------

    def finish_pending(self) -> None:
        """Complete the ledger trail of a resolved decision (idempotently)."""
        state = self.state
        decision = state.pending_decision
        assert decision is not None
        if decision.kind == PERIODIC_EXIT:
            self.emit_checkpoint(cp.PERIODIC)
        elif decision.kind == TRUE_EXIT:
            if not state.pending_checkpoint_done:
                self.emit_checkpoint(cp.TRUE)
            self.record(lg.RUN_EXITED, {"kind": "true", "revolution": state.revolution})
        elif decision.kind == FORCED_EXIT:
            self.record(lg.RUN_EXITED, {"kind": "forced", "revolution": state.revolution})
        elif decision.kind == TRAVERSE_BACK:
            self.record(
                lg.TRAVERSED_BACK,
                {"revolution": state.revolution, "target": decision.target_stage},
            )

    def emit_checkpoint(self, kind: str) -> cp.Checkpoint:
        state = self.state
        mark = (state.revolution, kind)
        if mark in state.emitted_checkpoints:
            raise CheckpointExists(f"checkpoint {mark} already emitted")
        checkpoint = build_checkpoint(state, kind)
        artifact_dirs = {
            stage.name: stage_output_dir(state.workdir, stage.name)
            for stage in state.spec.stages
        }
        cp.write_checkpoint(checkpoint, state.workdir, artifact_dirs)
        self.record(
            lg.CHECKPOINT_EMITTED,
            {
                "revolution": checkpoint.revolution,
                "kind": kind,
                "checkpoint_id": checkpoint.checkpoint_id,
                "digest": checkpoint.digest,
            },
        )
        return checkpoint


def build_checkpoint(state: RunState, kind: str) -> cp.Checkpoint:
    artifact_digests = {}
    for stage in state.spec.stages:
        out = stage_output_dir(state.workdir, stage.name)
        if out.is_dir():
            artifact_digests[stage.name] = cp.hash_directory(out)
    return cp.Checkpoint(
        checkpoint_id=f"{state.run_id}-r{state.revolution}-{kind}",
        run_id=state.run_id,
        revolution=state.revolution,
        kind=kind,
        snapshot=snapshot_to_json(state.snapshot),
        artifact_digests=artifact_digests,
        created_at=lg._now(),
    )


def run_revolution(state: RunState, runners: RunnerRegistry | None = None) -> RunState:
    """Execute one revolution: stages, flag evaluation, decision application.

    Returns the updated state. A manual gate leaves the run AwaitingFlag
    with the revolution not advanced; a stage failure leaves it Failed.
    """
    if state.status != RUNNING:
        raise RunNotActive(f"run is {state.status}, not {RUNNING}")
    lock = _acquire(state.workdir)
    try:
        executor = _Executor(state, runners or default_registry())
        return executor.step_revolution()
    finally:
        lock.release()


def run_to_completion(state: RunState, runners: RunnerRegistry | None = None) -> RunState:
    """Drive revolutions until the run exits, fails or needs an operator."""
    registry = runners or default_registry()
    while state.status == RUNNING:
        state = run_revolution(state, registry)
    return state


def emit_checkpoint(state: RunState, kind: str) -> cp.Checkpoint:
    """Engine-internal checkpoint emission, exposed for direct testing."""
    lock = _acquire(state.workdir)
    try:
        executor = _Executor(state, default_registry())
        return executor.emit_checkpoint(kind)
    finally:
        lock.release()


def resolve_manual_flag(
    workdir: str | Path,
    decision: FlagDecision,
    resolver: str,
    runners: RunnerRegistry | None = None,
) -> RunState:
    """Apply an operator's decision to a run waiting at its flag.

    The decision is validated against the spec (traverse target must exist;
    at the budget boundary only exits are allowed, since any other decision
    would push the revolution counter past the budget) and then applied
    exactly as the automatic path would.
    """
    lock = _acquire(Path(workdir))
    try:
        state = resume(workdir)
        if state.status != AWAITING_FLAG:
            raise NotAwaitingFlag(f"run is {state.status}, not {AWAITING_FLAG}")
        _validate_manual_decision(state, decision)
        outcomes = _outcomes_from_payload(state.flag_payload)
        applied = decide_flag(
            *outcomes,
            state.revolution,
            state.spec.max_revolutions,
            manual_decision=decision,
        )
        executor = _Executor(state, runners or default_registry())
        executor.record(
            lg.FLAG_RESOLVED,
            {
                "revolution": state.revolution,
                "decision": applied.to_json(),
                "resolver": resolver,
            },
        )
        if state.pending_decision is not None:
            executor.finish_pending()
        return state
    finally:
        lock.release()


def _validate_manual_decision(state: RunState, decision: FlagDecision) -> None:
    budget = state.spec.max_revolutions
    if decision.kind == TRAVERSE_BACK:
        if decision.target_stage not in state.spec.stage_names():
            raise InvalidTraverseTarget(decision.target_stage)
    if state.revolution == budget and decision.kind in (CONTINUE, TRAVERSE_BACK, PERIODIC_EXIT):
        raise InvalidDecision(
            f"{decision.kind} at revolution {state.revolution} would exceed the "
            f"budget of {budget}; only an exit is possible"
        )
    if decision.kind == FORCED_EXIT and state.revolution != budget:
        raise InvalidDecision("forced-exit is only valid at the budget boundary")


# ---------------------------------------------------------------------------
# Run discovery (used by the CLI and the HTTP API)
# ---------------------------------------------------------------------------

def find_runs(root: str | Path) -> list[Path]:
    """Workdirs under ``root`` that contain a ledger, sorted by path."""
    root = Path(root)
    if not root.is_dir():
        return []
    found = {p.parent for p in root.rglob(lg.LEDGER_FILENAME)}
    return sorted(found)


def find_run(root: str | Path, run_id: str) -> Path:
    for workdir in find_runs(root):
        try:
            events = lg.read_ledger(lg.ledger_path(workdir))
        except CorruptLedger:
            continue
        if events and events[0].payload.get("run_id") == run_id:
            return workdir
    raise UnknownRun(f"no run {run_id!r} under {root}")

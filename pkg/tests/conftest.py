"""Shared helpers: spec builders, crash injection, ledger invariant checks."""

from __future__ import annotations

import functools
from contextlib import contextmanager
from pathlib import Path

import pytest

import spiralflow.ledger as lg
from spiralflow.engine import replay_events, resume, state_fingerprint
from spiralflow.gates import Always, Comparison, Never
from spiralflow.specs import Simulated, SpiralSpec, StageSpec, ensure_valid


def simulated_spec(
    goal_series,
    budget,
    *,
    stage_name="work",
    periodic=True,
    extra_stages=(),
):
    """Spec with one scripted stage emitting `goal`; true exit when goal >= 1."""
    stages = tuple(extra_stages) + (
        StageSpec(
            name=stage_name,
            kind="custom",
            runner=Simulated({"goal": tuple(goal_series)}),
            emits=("goal",),
        ),
    )
    return ensure_valid(
        SpiralSpec(
            goal="reach the scripted goal metric",
            stages=stages,
            flag_gate=Always(),
            true_exit_gate=Comparison("goal", ">=", 1),
            periodic_exit_gate=Always() if periodic else Never(),
            max_revolutions=budget,
        )
    )


class SimulatedCrash(RuntimeError):
    """Stands in for the process dying right after a ledger write."""


@contextmanager
def crash_after_appends(n: int):
    """Kill control flow once the n-th ledger append has hit disk."""
    real_append = lg.LedgerWriter.append
    seen = {"count": 0}

    @functools.wraps(real_append)
    def wrapped(self, kind, payload):
        event = real_append(self, kind, payload)
        seen["count"] += 1
        if seen["count"] >= n:
            raise SimulatedCrash(f"crashed after append {seen['count']}")
        return event

    lg.LedgerWriter.append = wrapped
    try:
        yield
    finally:
        lg.LedgerWriter.append = real_append


def event_kinds(workdir) -> list[str]:
    return [e.kind for e in lg.read_ledger(lg.ledger_path(workdir))]


def assert_ledger_invariants(workdir) -> None:
    """Every structural invariant a finished or in-flight ledger must hold."""
    events = lg.read_ledger(lg.ledger_path(workdir))  # enforces gapless + known kinds
    assert events, "ledger is empty"
    assert events[0].kind == lg.RUN_STARTED
    assert [e.sequence for e in events] == list(range(1, len(events) + 1))

    # Replay after every prefix must equal replay of that prefix (pure fold),
    # and the full replay must match resume().
    full = replay_events(events, workdir)
    assert state_fingerprint(full) == state_fingerprint(resume(workdir))
    budget = full.spec.max_revolutions
    assert full.revolution <= budget

    # Each RevolutionStarted is followed by exactly one FlagResolved or
    # StageFailed before the next RevolutionStarted.
    closers = 0
    open_revolution = False
    for event in events[1:]:
        if event.kind == lg.REVOLUTION_STARTED:
            assert not open_revolution or closers == 1
            open_revolution, closers = True, 0
        elif event.kind in (lg.FLAG_RESOLVED, lg.STAGE_FAILED):
            closers += 1
    if full.is_terminal:
        assert closers == 1

    # Nothing follows a terminal event.
    if any(e.kind == lg.RUN_EXITED for e in events):
        assert events[-1].kind == lg.RUN_EXITED
    if full.status == "Failed":
        assert events[-1].kind == lg.STAGE_FAILED


@pytest.fixture
def workdir(tmp_path) -> Path:
    return tmp_path / "run"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion, in order."""
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(acceptance.RESULTS):
        terminalreporter.write_line(line)

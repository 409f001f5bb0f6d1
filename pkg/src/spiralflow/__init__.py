"""Budgeted lifecycle runs: revolutions, flag checkpoints, gated exits.

A spiral spec names ordered stages and three gates. The engine executes
the stages once per revolution, evaluates the gates, records every step
in an append-only ledger, and exits through a periodic checkpoint, the
true (goal-met) exit, or the revolution budget.
"""

from .checkpoints import Checkpoint, latest_true_checkpoint, list_checkpoints, load_checkpoint
from .engine import (
    AWAITING_FLAG,
    EXITED_FORCED,
    EXITED_TRUE,
    FAILED,
    RUNNING,
    RunState,
    emit_checkpoint,
    replay_events,
    resolve_manual_flag,
    resume,
    run_revolution,
    run_to_completion,
    start_run,
)
from .errors import SpiralError
from .flags import FlagDecision, decide_flag, flag_count, parse_decision
from .gates import (
    AllOf,
    Always,
    AnyOf,
    Comparison,
    Gate,
    GateOutcome,
    Manual,
    Never,
    Not,
    evaluate_gate,
)
from .ledger import LedgerEvent, iter_ledger, ledger_path, read_ledger
from .runners import RunnerRegistry, default_registry
from .scenarios import ScenarioReport, covid_scenario, turnover_scenario
from .specs import (
    Command,
    Merge,
    MetricValue,
    Simulated,
    SpiralSpec,
    StageSpec,
    ensure_valid,
    load_spec,
    save_spec,
    spec_digest,
    validate_spec,
)

__version__ = "0.1.0"

# Deferred so `python -m spiralflow.monitor` executes the module exactly once
# (an eager import here would put it in sys.modules before runpy runs it).
_MONITOR_EXPORTS = ("Observation", "ReentrySignal", "reenter", "watch")


def __getattr__(name: str):
    if name in _MONITOR_EXPORTS:
        from importlib import import_module

        value = getattr(import_module(".monitor", __name__), name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__() -> list[str]:
    return sorted(set(globals()) | set(__all__))

__all__ = [
    "AWAITING_FLAG",
    "AllOf",
    "Always",
    "AnyOf",
    "Checkpoint",
    "Command",
    "Comparison",
    "EXITED_FORCED",
    "EXITED_TRUE",
    "FAILED",
    "FlagDecision",
    "Gate",
    "GateOutcome",
    "LedgerEvent",
    "Manual",
    "Merge",
    "MetricValue",
    "Never",
    "Not",
    "Observation",
    "ReentrySignal",
    "RUNNING",
    "RunState",
    "RunnerRegistry",
    "ScenarioReport",
    "Simulated",
    "SpiralError",
    "SpiralSpec",
    "StageSpec",
    "covid_scenario",
    "decide_flag",
    "default_registry",
    "emit_checkpoint",
    "ensure_valid",
    "evaluate_gate",
    "flag_count",
    "iter_ledger",
    "latest_true_checkpoint",
    "ledger_path",
    "list_checkpoints",
    "load_checkpoint",
    "load_spec",
    "parse_decision",
    "read_ledger",
    "reenter",
    "replay_events",
    "resolve_manual_flag",
    "resume",
    "run_revolution",
    "run_to_completion",
    "save_spec",
    "spec_digest",
    "start_run",
    "turnover_scenario",
    "validate_spec",
    "watch",
]

"""Flag decisions: the checkpoint arithmetic and the decision precedence.

Every revolution ends in exactly one flag. The decision precedence is
fixed: true exit beats everything, an unresolved manual gate parks the run,
budget exhaustion forces an exit, and only then does a periodic exit or a
plain continue apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import InvalidArithmetic, ManualDecisionRequired, MissingMetricError
from .gates import MISSING_METRIC, NEEDS_MANUAL, GateOutcome

CONTINUE = "continue"
TRAVERSE_BACK = "traverse-back"
PERIODIC_EXIT = "periodic-exit"
TRUE_EXIT = "true-exit"
FORCED_EXIT = "forced-exit"

DECISION_KINDS = (CONTINUE, TRAVERSE_BACK, PERIODIC_EXIT, TRUE_EXIT, FORCED_EXIT)

BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class FlagDecision:
    kind: str
    target_stage: str | None = None
    reason: str | None = None

    def __post_init__(self):
        if self.kind not in DECISION_KINDS:
            raise ValueError(f"unknown decision kind {self.kind!r}")
        if self.kind == TRAVERSE_BACK and not self.target_stage:
            raise ValueError("traverse-back needs a target stage")
        if self.kind != TRAVERSE_BACK and self.target_stage is not None:
            raise ValueError(f"{self.kind} takes no target stage")

    @property
    def is_terminal(self) -> bool:
        return self.kind in (TRUE_EXIT, FORCED_EXIT)

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.target_stage is not None:
            doc["target_stage"] = self.target_stage
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc

    @staticmethod
    def from_json(doc: Mapping) -> "FlagDecision":
        return FlagDecision(doc["kind"], doc.get("target_stage"), doc.get("reason"))


def continue_() -> FlagDecision:
    return FlagDecision(CONTINUE)


def traverse_back(target_stage: str) -> FlagDecision:
    return FlagDecision(TRAVERSE_BACK, target_stage=target_stage)


def periodic_exit() -> FlagDecision:
    return FlagDecision(PERIODIC_EXIT)


def true_exit() -> FlagDecision:
    return FlagDecision(TRUE_EXIT)


def forced_exit() -> FlagDecision:
    return FlagDecision(FORCED_EXIT, reason=BUDGET_EXHAUSTED)


def parse_decision(text: str) -> FlagDecision:
    """Parse the CLI grammar: continue | back:<stage> | periodic-exit | true-exit."""
    if text == "continue":
        return continue_()
    if text == "periodic-exit":
        return periodic_exit()
    if text == "true-exit":
        return true_exit()
    if text == "forced-exit":
        return forced_exit()
    if text.startswith("back:"):
        target = text[len("back:"):]
        if not target:
            raise ValueError("back: needs a stage name")
        return traverse_back(target)
    raise ValueError(
        f"unknown decision {text!r} (expected continue, back:<stage>, periodic-exit or true-exit)"
    )


def flag_count(iterations: int, true_exits: int) -> int:
    """Number of periodic (non-terminal) flag checkpoints: iterations - true_exits."""
    if iterations < 1:
        raise InvalidArithmetic(f"iterations must be >= 1, got {iterations}")
    if true_exits not in (0, 1):
        raise InvalidArithmetic(f"true_exits must be 0 or 1, got {true_exits}")
    if true_exits > iterations:
        raise InvalidArithmetic(
            f"true_exits ({true_exits}) cannot exceed iterations ({iterations})"
        )
    return iterations - true_exits


def decide_flag(
    true_outcome: GateOutcome,
    periodic_outcome: GateOutcome,
    flag_outcome: GateOutcome,
    revolution: int,
    budget: int,
    manual_decision: FlagDecision | None = None,
) -> FlagDecision:
    """Apply the fixed decision precedence to the three gate outcomes.

    A missing metric anywhere is an error, never a silent unsatisfied;
    it is surfaced before any decision is taken. When a manual gate is
    unresolved and no manual_decision is supplied, ManualDecisionRequired
    is raised; a supplied manual_decision is returned verbatim.
    """
    if not 1 <= revolution <= budget:
        raise ValueError(f"revolution {revolution} outside 1..budget={budget}")

    outcomes = (true_outcome, periodic_outcome, flag_outcome)
    for outcome in outcomes:
        if outcome.kind == MISSING_METRIC:
            raise MissingMetricError(outcome.missing_metric or "?")

    if true_outcome.is_satisfied:
        return true_exit()

    if any(o.kind == NEEDS_MANUAL for o in outcomes):
        if manual_decision is None:
            raise ManualDecisionRequired(
                {"revolution": revolution, "budget": budget}
            )
        return manual_decision

    if revolution == budget:
        return forced_exit()

    if periodic_outcome.is_satisfied:
        return periodic_exit()

    return continue_()

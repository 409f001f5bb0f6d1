"""Gate predicate AST and its evaluation over metric snapshots.

Gates are small boolean trees over named metrics. Evaluation is total:
every gate yields exactly one of satisfied / unsatisfied / needs-manual /
missing-metric. A missing metric is never silently treated as unsatisfied,
and it dominates sibling branches so that a composite cannot hide it.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

# Comparison operators use exact arithmetic: a threshold like 0.85 means
# literally >= 0.85, no epsilon.
OPS = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
    "!=": operator.ne,
}

# Accepted aliases when parsing gate documents.
_OP_ALIASES = {"==": "=", "≤": "<=", "≥": ">=", "≠": "!="}


@dataclass(frozen=True)
class Comparison:
    metric: str
    op: str
    threshold: float

    def __post_init__(self):
        canon = _OP_ALIASES.get(self.op, self.op)
        if canon != self.op:
            object.__setattr__(self, "op", canon)
        if self.op not in OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class AllOf:
    gates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))


@dataclass(frozen=True)
class AnyOf:
    gates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))


@dataclass(frozen=True)
class Not:
    gate: "Gate"


@dataclass(frozen=True)
class Manual:
    prompt: str


@dataclass(frozen=True)
class Always:
    pass


@dataclass(frozen=True)
class Never:
    pass


Gate = Union[Comparison, AllOf, AnyOf, Not, Manual, Always, Never]

SATISFIED = "satisfied"
UNSATISFIED = "unsatisfied"
NEEDS_MANUAL = "needs-manual"
MISSING_METRIC = "missing-metric"


@dataclass(frozen=True)
class GateOutcome:
    kind: str
    missing_metric: str | None = None

    @property
    def is_satisfied(self) -> bool:
        return self.kind == SATISFIED

    def to_json(self) -> dict:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.missing_metric is not None:
            doc["missing_metric"] = self.missing_metric
        return doc

    @staticmethod
    def from_json(doc: Mapping) -> "GateOutcome":
        return GateOutcome(doc["kind"], doc.get("missing_metric"))


OUTCOME_SATISFIED = GateOutcome(SATISFIED)
OUTCOME_UNSATISFIED = GateOutcome(UNSATISFIED)
OUTCOME_NEEDS_MANUAL = GateOutcome(NEEDS_MANUAL)


def missing(metric: str) -> GateOutcome:
    return GateOutcome(MISSING_METRIC, missing_metric=metric)


def _value_of(entry) -> float:
    # Snapshots may carry rich per-metric records; gates only need the value.
    value = getattr(entry, "value", entry)
    return value


def evaluate_gate(
    gate: Gate,
    snapshot: Mapping[str, Any],
    resolutions: Mapping[str, bool] | None = None,
) -> GateOutcome:
    """Evaluate ``gate`` against a metric snapshot.

    ``resolutions`` maps Manual prompts to operator answers; an unresolved
    Manual leaf yields needs-manual unless a sibling already decides the
    composite. Deterministic and pure.
    """
    resolutions = resolutions or {}
    if isinstance(gate, Always):
        return OUTCOME_SATISFIED
    if isinstance(gate, Never):
        return OUTCOME_UNSATISFIED
    if isinstance(gate, Manual):
        answer = resolutions.get(gate.prompt)
        if answer is None:
            return OUTCOME_NEEDS_MANUAL
        return OUTCOME_SATISFIED if answer else OUTCOME_UNSATISFIED
    if isinstance(gate, Comparison):
        if gate.metric not in snapshot:
            return missing(gate.metric)
        value = _value_of(snapshot[gate.metric])
        ok = OPS[gate.op](value, gate.threshold)
        return OUTCOME_SATISFIED if ok else OUTCOME_UNSATISFIED
    if isinstance(gate, Not):
        inner = evaluate_gate(gate.gate, snapshot, resolutions)
        if inner.kind == SATISFIED:
            return OUTCOME_UNSATISFIED
        if inner.kind == UNSATISFIED:
            return OUTCOME_SATISFIED
        return inner
    if isinstance(gate, (AllOf, AnyOf)):
        # Children are always fully evaluated: short-circuiting must not
        # hide a missing metric, so the first missing child wins outright.
        results = [evaluate_gate(g, snapshot, resolutions) for g in gate.gates]
        for res in results:
            if res.kind == MISSING_METRIC:
                return res
        decided = UNSATISFIED if isinstance(gate, AllOf) else SATISFIED
        if any(r.kind == decided for r in results):
            return GateOutcome(decided)
        if any(r.kind == NEEDS_MANUAL for r in results):
            return OUTCOME_NEEDS_MANUAL
        return OUTCOME_SATISFIED if isinstance(gate, AllOf) else OUTCOME_UNSATISFIED
    raise TypeError(f"not a gate: {gate!r}")


def gate_metric_names(gate: Gate) -> set[str]:
    """All metric names referenced anywhere in the gate tree."""
    if isinstance(gate, Comparison):
        return {gate.metric}
    if isinstance(gate, Not):
        return gate_metric_names(gate.gate)
    if isinstance(gate, (AllOf, AnyOf)):
        names: set[str] = set()
        for g in gate.gates:
            names |= gate_metric_names(g)
        return names
    return set()


def manual_prompts(gate: Gate) -> list[str]:
    """Distinct manual prompts in the gate tree, in evaluation order.

    Resolutions are keyed by prompt text, so repeated prompts are one
    decision and are reported once.
    """
    def walk(g: Gate):
        if isinstance(g, Manual):
            yield g.prompt
        elif isinstance(g, Not):
            yield from walk(g.gate)
        elif isinstance(g, (AllOf, AnyOf)):
            for child in g.gates:
                yield from walk(child)

    return list(dict.fromkeys(walk(gate)))


def gate_to_text(gate: Gate) -> str:
    """Compact human-readable rendering, e.g. ``auc >= 0.85``."""
    if isinstance(gate, Comparison):
        threshold = gate.threshold
        if isinstance(threshold, float) and threshold.is_integer():
            threshold = int(threshold)
        return f"{gate.metric} {gate.op} {threshold}"
    if isinstance(gate, AllOf):
        return "all(" + ", ".join(gate_to_text(g) for g in gate.gates) + ")"
    if isinstance(gate, AnyOf):
        return "any(" + ", ".join(gate_to_text(g) for g in gate.gates) + ")"
    if isinstance(gate, Not):
        return f"not({gate_to_text(gate.gate)})"
    if isinstance(gate, Manual):
        return f"manual({gate.prompt!r})"
    if isinstance(gate, Always):
        return "always"
    return "never"


# ---------------------------------------------------------------------------
# JSON encoding: tagged unions, tag field "type".
# ---------------------------------------------------------------------------

def gate_to_json(gate: Gate) -> dict:
    if isinstance(gate, Comparison):
        return {
            "type": "comparison",
            "metric": gate.metric,
            "op": gate.op,
            "threshold": gate.threshold,
        }
    if isinstance(gate, AllOf):
        return {"type": "all", "gates": [gate_to_json(g) for g in gate.gates]}
    if isinstance(gate, AnyOf):
        return {"type": "any", "gates": [gate_to_json(g) for g in gate.gates]}
    if isinstance(gate, Not):
        return {"type": "not", "gate": gate_to_json(gate.gate)}
    if isinstance(gate, Manual):
        return {"type": "manual", "prompt": gate.prompt}
    if isinstance(gate, Always):
        return {"type": "always"}
    if isinstance(gate, Never):
        return {"type": "never"}
    raise TypeError(f"not a gate: {gate!r}")


def gate_from_json(doc: Mapping) -> Gate:
    """Parse a gate document. Raises ValueError on malformed input."""
    if not isinstance(doc, Mapping) or "type" not in doc:
        raise ValueError(f"gate document needs a 'type' tag: {doc!r}")
    tag = doc["type"]
    if tag == "comparison":
        threshold = doc["threshold"]
        if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
            raise ValueError(f"comparison threshold must be a number: {threshold!r}")
        return Comparison(str(doc["metric"]), str(doc["op"]), float(threshold))
    if tag == "all":
        return AllOf(tuple(gate_from_json(g) for g in doc.get("gates", [])))
    if tag == "any":
        return AnyOf(tuple(gate_from_json(g) for g in doc.get("gates", [])))
    if tag == "not":
        return Not(gate_from_json(doc["gate"]))
    if tag == "manual":
        return Manual(str(doc["prompt"]))
    if tag == "always":
        return Always()
    if tag == "never":
        return Never()
    raise ValueError(f"unknown gate type {tag!r}")

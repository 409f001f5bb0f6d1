"""Gate AST evaluation: totality, exact comparisons, propagation rules."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiralflow.gates import (
    AllOf,
    Always,
    AnyOf,
    Comparison,
    Manual,
    Never,
    Not,
    evaluate_gate,
    gate_from_json,
    gate_metric_names,
    gate_to_json,
    gate_to_text,
    manual_prompts,
)

SAT = "satisfied"
UNSAT = "unsatisfied"
MANUAL = "needs-manual"
MISSING = "missing-metric"


def kind(gate, snapshot, resolutions=None):
    return evaluate_gate(gate, snapshot, resolutions).kind


class TestComparison:
    def test_below_threshold(self):
        assert kind(Comparison("auc", ">=", 0.85), {"auc": 0.76}) == UNSAT

    def test_at_or_above_threshold(self):
        assert kind(Comparison("auc", ">=", 0.85), {"auc": 0.87}) == SAT
        # exact arithmetic: the boundary value satisfies >=, no epsilon games
        assert kind(Comparison("auc", ">=", 0.85), {"auc": 0.85}) == SAT

    @pytest.mark.parametrize(
        "op,value,expected",
        [
            ("<", 1.9, SAT),
            ("<", 2.0, UNSAT),
            ("<=", 2.0, SAT),
            ("=", 2.0, SAT),
            ("=", 2.1, UNSAT),
            (">", 2.0, UNSAT),
            (">", 2.5, SAT),
            ("!=", 2.0, UNSAT),
            ("!=", 3.0, SAT),
        ],
    )
    def test_operator_table(self, op, value, expected):
        assert kind(Comparison("m", op, 2.0), {"m": value}) == expected

    def test_unicode_operator_aliases(self):
        assert Comparison("m", "≥", 1).op == ">="
        assert Comparison("m", "≤", 1).op == "<="
        assert Comparison("m", "≠", 1).op == "!="
        assert Comparison("m", "==", 1).op == "="

    def test_unknown_operator_rejected(self):
        with pytest.raises(ValueError):
            Comparison("m", "~", 1)

    def test_missing_metric(self):
        outcome = evaluate_gate(Comparison("f1", ">", 0.5), {"auc": 0.9})
        assert outcome.kind == MISSING
        assert outcome.missing_metric == "f1"


class TestEmptyComposites:
    def test_empty_all_is_satisfied(self):
        assert kind(AllOf(()), {}) == SAT

    def test_empty_any_is_unsatisfied(self):
        assert kind(AnyOf(()), {}) == UNSAT


class TestMissingDominance:
    """A missing metric must surface even when a sibling decides the gate."""

    def test_all_missing_beats_unsatisfied_sibling(self):
        gate = AllOf((Comparison("x", ">", 0), Comparison("gone", ">", 0)))
        outcome = evaluate_gate(gate, {"x": -1.0})
        assert outcome.kind == MISSING
        assert outcome.missing_metric == "gone"

    def test_any_missing_beats_satisfied_sibling(self):
        gate = AnyOf((Comparison("x", ">", 0), Comparison("gone", ">", 0)))
        assert kind(gate, {"x": 5.0}) == MISSING

    def test_not_passes_missing_through(self):
        assert kind(Not(Comparison("gone", "<", 1)), {}) == MISSING


class TestManualPropagation:
    def test_unresolved_manual_needs_decision(self):
        assert kind(Manual("ship it?"), {}) == MANUAL

    def test_resolution_true(self):
        assert kind(Manual("ship it?"), {}, {"ship it?": True}) == SAT

    def test_resolution_false(self):
        assert kind(Manual("ship it?"), {}, {"ship it?": False}) == UNSAT

    def test_all_unsat_sibling_decides_over_manual(self):
        gate = AllOf((Comparison("x", ">", 0), Manual("ok?")))
        assert kind(gate, {"x": -1.0}) == UNSAT

    def test_all_sat_sibling_leaves_manual_pending(self):
        gate = AllOf((Comparison("x", ">", 0), Manual("ok?")))
        assert kind(gate, {"x": 1.0}) == MANUAL

    def test_any_sat_sibling_decides_over_manual(self):
        gate = AnyOf((Comparison("x", ">", 0), Manual("ok?")))
        assert kind(gate, {"x": 1.0}) == SAT

    def test_any_unsat_sibling_leaves_manual_pending(self):
        gate = AnyOf((Comparison("x", ">", 0), Manual("ok?")))
        assert kind(gate, {"x": -1.0}) == MANUAL

    def test_not_wraps_manual(self):
        assert kind(Not(Manual("ok?")), {}) == MANUAL
        assert kind(Not(Manual("ok?")), {}, {"ok?": True}) == UNSAT

    def test_prompt_collection(self):
        gate = AllOf((Manual("a?"), Not(Manual("b?")), Manual("a?")))
        assert manual_prompts(gate) == ["a?", "b?"]


# ---------------------------------------------------------------------------
# Property tests over random gates and snapshots
# ---------------------------------------------------------------------------

METRICS = ("auc", "recall", "rows", "drift")

values = st.floats(min_value=-10, max_value=10, allow_nan=False)
comparisons = st.builds(
    Comparison,
    st.sampled_from(METRICS),
    st.sampled_from(("<", "<=", "=", ">=", ">", "!=")),
    values,
)
leaves = st.one_of(
    comparisons,
    st.just(Always()),
    st.just(Never()),
    st.builds(Manual, st.sampled_from(("go?", "stop?"))),
)
gates = st.recursive(
    leaves,
    lambda inner: st.one_of(
        st.builds(Not, inner),
        st.builds(AllOf, st.lists(inner, max_size=3).map(tuple)),
        st.builds(AnyOf, st.lists(inner, max_size=3).map(tuple)),
    ),
    max_leaves=8,
)
snapshots = st.dictionaries(st.sampled_from(METRICS), values, max_size=len(METRICS))
resolution_maps = st.dictionaries(
    st.sampled_from(("go?", "stop?")), st.booleans(), max_size=2
)


@settings(max_examples=300, deadline=None)
@given(gates=st.lists(gates, max_size=3).map(tuple), snap=snapshots, res=resolution_maps)
def test_de_morgan(gates, snap, res):
    lhs = evaluate_gate(Not(AnyOf(gates)), snap, res)
    rhs = evaluate_gate(AllOf(tuple(Not(g) for g in gates)), snap, res)
    assert lhs == rhs
    lhs = evaluate_gate(Not(AllOf(gates)), snap, res)
    rhs = evaluate_gate(AnyOf(tuple(Not(g) for g in gates)), snap, res)
    assert lhs == rhs


@settings(max_examples=300, deadline=None)
@given(gate=gates, snap=snapshots, res=resolution_maps)
def test_double_negation(gate, snap, res):
    assert evaluate_gate(Not(Not(gate)), snap, res) == evaluate_gate(gate, snap, res)


@settings(max_examples=300, deadline=None)
@given(gate=gates, snap=snapshots, res=resolution_maps)
def test_evaluation_is_deterministic_and_total(gate, snap, res):
    first = evaluate_gate(gate, snap, res)
    second = evaluate_gate(gate, snap, res)
    assert first == second
    assert first.kind in (SAT, UNSAT, MANUAL, MISSING)


@settings(max_examples=200, deadline=None)
@given(gate=gates)
def test_json_round_trip(gate):
    assert gate_from_json(gate_to_json(gate)) == gate


def test_metric_names_walks_whole_tree():
    gate = AllOf(
        (
            Comparison("auc", ">=", 0.85),
            Not(AnyOf((Comparison("drift", ">", 0.2), Manual("check")))),
        )
    )
    assert gate_metric_names(gate) == {"auc", "drift"}


def test_gate_text_is_readable():
    gate = AllOf((Comparison("auc", ">=", 0.85), Comparison("policy_uplift_ok", ">=", 1)))
    assert gate_to_text(gate) == "all(auc >= 0.85, policy_uplift_ok >= 1)"

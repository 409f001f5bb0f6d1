"""Two bundled end-to-end scenarios, used as fixtures and as documentation.

The weekly-dataset scenario drives a single merge stage for five revolutions
with a periodic checkpoint each week and a calendar-style exit at week 5.
The attrition scenario drives a four-stage modeling loop whose evaluation
metrics improve over three revolutions until the business gate is met.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import ledger as lg
from .engine import replay_events, run_to_completion, start_run
from .flags import FlagDecision
from .gates import AllOf, Always, Comparison, Never
from .specs import Merge, Simulated, SpiralSpec, StageSpec, ValidatedSpec, ensure_valid

COVID_WEEKS = 5
TURNOVER_BUDGET = 5


@dataclass(frozen=True)
class ScenarioReport:
    """Run summary whose counts come exclusively from the ledger."""

    run_id: str
    decisions: tuple[FlagDecision, ...]
    flags_evaluated: int
    periodic_checkpoints: int
    true_checkpoints: int
    final_status: str

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "decisions": [d.to_json() for d in self.decisions],
            "flags_evaluated": self.flags_evaluated,
            "periodic_checkpoints": self.periodic_checkpoints,
            "true_checkpoints": self.true_checkpoints,
            "final_status": self.final_status,
        }


def report_from_ledger(workdir: str | Path) -> ScenarioReport:
    events = lg.read_ledger(lg.ledger_path(workdir))
    state = replay_events(events, workdir)
    decisions = tuple(
        FlagDecision.from_json(e.payload["decision"])
        for e in events
        if e.kind == lg.FLAG_RESOLVED
    )
    return ScenarioReport(
        run_id=state.run_id,
        decisions=decisions,
        flags_evaluated=sum(1 for e in events if e.kind == lg.FLAG_EVALUATED),
        periodic_checkpoints=sum(
            1
            for e in events
            if e.kind == lg.CHECKPOINT_EMITTED and e.payload["kind"] == "periodic"
        ),
        true_checkpoints=sum(
            1
            for e in events
            if e.kind == lg.CHECKPOINT_EMITTED and e.payload["kind"] == "true"
        ),
        final_status=state.status,
    )


# ---------------------------------------------------------------------------
# Scenario 1: weekly incremental dataset with calendar exit.
# ---------------------------------------------------------------------------

def covid_spec(weeks: int = COVID_WEEKS) -> SpiralSpec:
    """One merge stage per revolution; periodic checkpoint every week,
    terminal exit when the fifth week's revolution completes."""
    return SpiralSpec(
        goal="Maintain a unified regional infection dataset, refreshed weekly",
        stages=(
            StageSpec(
                name="integrate",
                kind="data-preparation",
                runner=Merge(
                    incoming_pattern="incoming/week{revolution}.csv",
                    key_columns=("region",),
                    accumulated="accumulated/dataset.csv",
                ),
                emits=("rows_incoming", "rows_total", "rows_replaced"),
            ),
        ),
        flag_gate=Always(),
        true_exit_gate=Comparison("revolution_index", "=", weeks),
        periodic_exit_gate=Always(),
        max_revolutions=weeks,
    )


def install_covid_fixtures(workdir: str | Path) -> Path:
    """Copy the bundled weekly CSVs into the run's incoming directory."""
    incoming = Path(workdir) / "incoming"
    incoming.mkdir(parents=True, exist_ok=True)
    source = resources.files("spiralflow") / "fixtures" / "covid"
    for week in range(1, COVID_WEEKS + 1):
        name = f"week{week}.csv"
        with resources.as_file(source / name) as fixture:
            shutil.copyfile(fixture, incoming / name)
    return incoming


def covid_scenario(workdir: str | Path) -> ScenarioReport:
    spec = ensure_valid(covid_spec())
    state = start_run(spec, workdir)
    install_covid_fixtures(workdir)
    run_to_completion(state)
    return report_from_ledger(workdir)


# ---------------------------------------------------------------------------
# Scenario 2: attrition model loop exiting on the business gate.
# ---------------------------------------------------------------------------

def turnover_spec(budget: int = TURNOVER_BUDGET) -> SpiralSpec:
    evaluation_script = {
        "auc": (0.76, 0.82, 0.87),
        "policy_uplift_ok": (0.0, 0.0, 1.0),
    }
    return SpiralSpec(
        goal=(
            "Predict employee attrition well enough to act on: ROC AUC at or "
            "above 0.85 and a retention-policy simulation that meets its goals"
        ),
        stages=(
            StageSpec("data-collection", "data-collection", Simulated({})),
            StageSpec("feature-engineering", "feature-engineering", Simulated({})),
            StageSpec("model-building", "model-building", Simulated({})),
            StageSpec(
                "model-evaluation",
                "model-evaluation",
                Simulated(evaluation_script),
                emits=("auc", "policy_uplift_ok"),
            ),
        ),
        flag_gate=Always(),
        true_exit_gate=AllOf(
            (
                Comparison("auc", ">=", 0.85),
                Comparison("policy_uplift_ok", ">=", 1),
            )
        ),
        periodic_exit_gate=Never(),
        max_revolutions=budget,
        reentry_gate=Comparison("auc", "<", 0.80),
    )


def turnover_scenario(workdir: str | Path) -> ScenarioReport:
    spec = ensure_valid(turnover_spec())
    state = start_run(spec, workdir)
    run_to_completion(state)
    return report_from_ledger(workdir)


def validated_covid_spec() -> ValidatedSpec:
    return ensure_valid(covid_spec())


def validated_turnover_spec() -> ValidatedSpec:
    return ensure_valid(turnover_spec())

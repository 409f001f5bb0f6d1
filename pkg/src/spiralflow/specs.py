"""Spiral spec documents: types, JSON (de)serialization and validation.

A spec declares the business goal, the ordered stages, the three gates
(flag / true-exit / periodic-exit), a revolution budget and an optional
drift re-entry gate. Documents are JSON with ``spec_version: 1``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, NewType

import re

from .errors import SpecValidationError
from .gates import AllOf, AnyOf, Comparison, Gate, Not, gate_from_json, gate_to_json

SPEC_VERSION = 1

STAGE_KINDS = (
    "business-understanding",
    "data-collection",
    "data-preparation",
    "data-cleaning",
    "data-exploration",
    "feature-engineering",
    "model-building",
    "model-evaluation",
    "deployment",
    "maintenance",
    "custom",
)

# Metrics the engine provides on every snapshot without any stage emitting
# them. revolution_index lets calendar-style exits ("stop at week 5") be
# expressed as ordinary gates.
IMPLICIT_METRICS = frozenset({"revolution_index"})

DEFAULT_COMMAND_TIMEOUT = 3600.0


# ---------------------------------------------------------------------------
# Runner bindings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Command:
    argv: tuple[str, ...]
    env: Mapping[str, str] = field(default_factory=dict)
    timeout: float = DEFAULT_COMMAND_TIMEOUT

    def __post_init__(self):
        object.__setattr__(self, "argv", tuple(self.argv))
        object.__setattr__(self, "env", dict(self.env))


@dataclass(frozen=True)
class Simulated:
    """Scripted per-revolution metric values; series are indexed rev-1."""

    script: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "script", {k: tuple(v) for k, v in dict(self.script).items()}
        )


@dataclass(frozen=True)
class Merge:
    """Weekly-refresh CSV merge: union rows, keep the latest per key tuple."""

    incoming_pattern: str
    key_columns: tuple[str, ...]
    accumulated: str

    def __post_init__(self):
        object.__setattr__(self, "key_columns", tuple(self.key_columns))


RunnerBinding = Command | Simulated | Merge


@dataclass(frozen=True)
class StageSpec:
    name: str
    kind: str
    runner: RunnerBinding
    emits: tuple[str, ...] = ()
    active_from_revolution: int = 1

    def __post_init__(self):
        object.__setattr__(self, "emits", tuple(self.emits))


@dataclass(frozen=True)
class SpiralSpec:
    goal: str
    stages: tuple[StageSpec, ...]
    flag_gate: Gate
    true_exit_gate: Gate
    periodic_exit_gate: Gate
    max_revolutions: int
    reentry_gate: Gate | None = None

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    def stage_names(self) -> list[str]:
        return [s.name for s in self.stages]

    def stage(self, name: str) -> StageSpec:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def emitted_metrics(self) -> set[str]:
        names: set[str] = set()
        for s in self.stages:
            names.update(s.emits)
        return names


# A spec that passed validate_spec. Engine entry points require this.
ValidatedSpec = NewType("ValidatedSpec", SpiralSpec)


@dataclass(frozen=True)
class MetricValue:
    value: float
    source_stage: str
    revolution: int

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "source_stage": self.source_stage,
            "revolution": self.revolution,
        }

    @staticmethod
    def from_json(doc: Mapping) -> "MetricValue":
        return MetricValue(doc["value"], doc["source_stage"], doc["revolution"])


# Metric name -> MetricValue; later revolutions overwrite earlier entries.
MetricSnapshot = dict[str, MetricValue]


def snapshot_values(snapshot: Mapping[str, MetricValue]) -> dict[str, float]:
    return {name: mv.value for name, mv in snapshot.items()}


def snapshot_to_json(snapshot: Mapping[str, MetricValue]) -> dict:
    return {name: mv.to_json() for name, mv in sorted(snapshot.items())}


def snapshot_from_json(doc: Mapping) -> MetricSnapshot:
    return {name: MetricValue.from_json(mv) for name, mv in doc.items()}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_STAGE_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


@dataclass(frozen=True)
class SpecError:
    """One validation violation, with a path to the offending field."""

    kind: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.path}: {self.message}"


def validate_spec(raw: SpiralSpec) -> ValidatedSpec | list[SpecError]:
    """Check every structural invariant; report all violations, no fail-fast.

    Returns the spec (as ValidatedSpec) when clean, otherwise the full
    error list. Simulated script coverage is deliberately not checked here:
    runs that exit early never index past their exit revolution, so short
    scripts only fail at runtime (ScriptExhausted).
    """
    errors: list[SpecError] = []

    if not raw.goal or not str(raw.goal).strip():
        errors.append(SpecError("MissingGoal", "goal", "goal statement is mandatory"))

    if not raw.stages:
        errors.append(SpecError("EmptyStages", "stages", "at least one stage is required"))

    if raw.max_revolutions < 1:
        errors.append(
            SpecError(
                "NonPositiveBudget",
                "max_revolutions",
                f"budget must be >= 1, got {raw.max_revolutions}",
            )
        )

    seen: dict[str, int] = {}
    for i, stage in enumerate(raw.stages):
        path = f"stages[{i}]"
        # Stage names become directory names (stage outputs, checkpoint
        # artifact copies), so they must be plain path-safe identifiers.
        if not _STAGE_NAME.fullmatch(stage.name or ""):
            errors.append(
                SpecError(
                    "InvalidField",
                    f"{path}.name",
                    f"stage name {stage.name!r} must match {_STAGE_NAME.pattern}",
                )
            )
        if stage.name in seen:
            errors.append(
                SpecError(
                    "DuplicateStageName",
                    f"{path}.name",
                    f"stage name {stage.name!r} already used at stages[{seen[stage.name]}]",
                )
            )
        else:
            seen[stage.name] = i
        if stage.kind not in STAGE_KINDS:
            errors.append(
                SpecError("UnknownStageKind", f"{path}.kind", f"unknown kind {stage.kind!r}")
            )
        if len(set(stage.emits)) != len(stage.emits):
            dupes = sorted({n for n in stage.emits if stage.emits.count(n) > 1})
            errors.append(
                SpecError("DuplicateEmit", f"{path}.emits", f"repeated metric names {dupes}")
            )
        if stage.active_from_revolution < 1:
            errors.append(
                SpecError(
                    "InvalidField",
                    f"{path}.active_from_revolution",
                    "must be a positive integer",
                )
            )
        errors.extend(_check_runner(stage.runner, f"{path}.runner"))

    declared = raw.emitted_metrics() | IMPLICIT_METRICS
    for gate_name, gate in _gates_of(raw):
        if gate is None:
            continue
        errors.extend(_check_gate_metrics(gate, declared, gate_name))

    if errors:
        return errors
    return ValidatedSpec(raw)


def ensure_valid(raw: SpiralSpec) -> ValidatedSpec:
    """validate_spec, raising SpecValidationError instead of returning errors."""
    result = validate_spec(raw)
    if isinstance(result, list):
        raise SpecValidationError(result)
    return result


def _gates_of(spec: SpiralSpec):
    return [
        ("flag_gate", spec.flag_gate),
        ("true_exit_gate", spec.true_exit_gate),
        ("periodic_exit_gate", spec.periodic_exit_gate),
        ("reentry_gate", spec.reentry_gate),
    ]


def _check_gate_metrics(gate: Gate, declared: set[str], path: str) -> list[SpecError]:
    errors = []
    for leaf_path, metric in _comparison_paths(gate, path):
        if metric not in declared:
            errors.append(
                SpecError(
                    "UnknownMetricInGate",
                    leaf_path,
                    f"metric {metric!r} is never emitted by any stage",
                )
            )
    return errors


def _comparison_paths(gate: Gate, path: str):
    """Yield (path, metric) for every comparison leaf, depth-first."""
    if isinstance(gate, Comparison):
        yield f"{path}.metric", gate.metric
    elif isinstance(gate, Not):
        yield from _comparison_paths(gate.gate, f"{path}.gate")
    elif isinstance(gate, (AllOf, AnyOf)):
        for i, g in enumerate(gate.gates):
            yield from _comparison_paths(g, f"{path}.gates[{i}]")


def _check_runner(binding: RunnerBinding, path: str) -> list[SpecError]:
    errors = []
    if isinstance(binding, Command):
        if not binding.argv:
            errors.append(SpecError("InvalidRunner", f"{path}.argv", "argv must be non-empty"))
        if binding.timeout <= 0:
            errors.append(SpecError("InvalidRunner", f"{path}.timeout", "timeout must be > 0"))
    elif isinstance(binding, Merge):
        if not binding.key_columns:
            errors.append(
                SpecError("InvalidRunner", f"{path}.key_columns", "key_columns must be non-empty")
            )
        if "{revolution}" not in binding.incoming_pattern:
            errors.append(
                SpecError(
                    "InvalidRunner",
                    f"{path}.incoming_pattern",
                    "pattern needs a {revolution} placeholder",
                )
            )
    return errors


def validate_traverse_target(spec: SpiralSpec, target: str) -> SpecError | None:
    """UnknownTraverseTarget check for decisions made against this spec."""
    if target not in spec.stage_names():
        return SpecError(
            "UnknownTraverseTarget", "decision.target_stage", f"no stage named {target!r}"
        )
    return None


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def runner_to_json(binding: RunnerBinding) -> dict:
    if isinstance(binding, Command):
        return {
            "type": "command",
            "argv": list(binding.argv),
            "env": dict(binding.env),
            "timeout": binding.timeout,
        }
    if isinstance(binding, Simulated):
        return {"type": "simulated", "script": {k: list(v) for k, v in binding.script.items()}}
    if isinstance(binding, Merge):
        return {
            "type": "merge",
            "incoming_pattern": binding.incoming_pattern,
            "key_columns": list(binding.key_columns),
            "accumulated": binding.accumulated,
        }
    raise TypeError(f"not a runner binding: {binding!r}")


def runner_from_json(doc: Mapping) -> RunnerBinding:
    tag = doc.get("type")
    if tag == "command":
        return Command(
            argv=tuple(doc["argv"]),
            env=dict(doc.get("env", {})),
            timeout=float(doc.get("timeout", DEFAULT_COMMAND_TIMEOUT)),
        )
    if tag == "simulated":
        return Simulated(script={k: tuple(v) for k, v in doc.get("script", {}).items()})
    if tag == "merge":
        return Merge(
            incoming_pattern=str(doc["incoming_pattern"]),
            key_columns=tuple(doc["key_columns"]),
            accumulated=str(doc["accumulated"]),
        )
    raise ValueError(f"unknown runner type {tag!r}")


def spec_to_json(spec: SpiralSpec) -> dict:
    doc: dict[str, Any] = {
        "spec_version": SPEC_VERSION,
        "goal": spec.goal,
        "stages": [
            {
                "name": s.name,
                "kind": s.kind,
                "runner": runner_to_json(s.runner),
                "emits": list(s.emits),
                "active_from_revolution": s.active_from_revolution,
            }
            for s in spec.stages
        ],
        "flag_gate": gate_to_json(spec.flag_gate),
        "true_exit_gate": gate_to_json(spec.true_exit_gate),
        "periodic_exit_gate": gate_to_json(spec.periodic_exit_gate),
        "max_revolutions": spec.max_revolutions,
    }
    if spec.reentry_gate is not None:
        doc["reentry_gate"] = gate_to_json(spec.reentry_gate)
    return doc


def spec_from_json(doc: Mapping) -> SpiralSpec:
    """Parse a spec document. Malformed shapes raise SpecValidationError."""
    problems: list[SpecError] = []
    if not isinstance(doc, Mapping):
        raise SpecValidationError(
            [SpecError("MalformedDocument", "$", "spec document must be a JSON object")]
        )
    version = doc.get("spec_version")
    if version != SPEC_VERSION:
        problems.append(
            SpecError(
                "UnsupportedSpecVersion",
                "spec_version",
                f"expected {SPEC_VERSION}, got {version!r}",
            )
        )

    stages = []
    for i, sdoc in enumerate(doc.get("stages", [])):
        path = f"stages[{i}]"
        try:
            stages.append(
                StageSpec(
                    name=str(sdoc["name"]),
                    kind=str(sdoc["kind"]),
                    runner=runner_from_json(sdoc["runner"]),
                    emits=tuple(sdoc.get("emits", [])),
                    active_from_revolution=int(sdoc.get("active_from_revolution", 1)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(SpecError("MalformedDocument", path, str(exc)))

    def parse_gate(field_name: str, required: bool = True) -> Gate | None:
        if field_name not in doc:
            if required:
                problems.append(
                    SpecError("MalformedDocument", field_name, "required gate is missing")
                )
            return None
        try:
            return gate_from_json(doc[field_name])
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(SpecError("MalformedDocument", field_name, str(exc)))
            return None

    flag_gate = parse_gate("flag_gate")
    true_gate = parse_gate("true_exit_gate")
    periodic_gate = parse_gate("periodic_exit_gate")
    reentry_gate = parse_gate("reentry_gate", required=False)

    try:
        budget = int(doc.get("max_revolutions", 0))
    except (TypeError, ValueError):
        problems.append(
            SpecError("MalformedDocument", "max_revolutions", "must be an integer")
        )
        budget = 0

    if problems:
        raise SpecValidationError(problems)

    return SpiralSpec(
        goal=str(doc.get("goal", "")),
        stages=tuple(stages),
        flag_gate=flag_gate if flag_gate is not None else AllOf(()),
        true_exit_gate=true_gate if true_gate is not None else AllOf(()),
        periodic_exit_gate=periodic_gate if periodic_gate is not None else AllOf(()),
        max_revolutions=budget,
        reentry_gate=reentry_gate,
    )


def load_spec(path: str | Path) -> SpiralSpec:
    """Read and parse a spiral.json document (shape only, no validation)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecValidationError(
            [SpecError("MalformedDocument", "$", f"not valid JSON: {exc}")]
        ) from exc
    return spec_from_json(doc)


def save_spec(spec: SpiralSpec, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(spec_to_json(spec), indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )


def spec_digest(spec: SpiralSpec) -> str:
    """Content hash of the canonical JSON form."""
    canonical = json.dumps(spec_to_json(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def with_budget(spec: SpiralSpec, max_revolutions: int) -> SpiralSpec:
    return replace(spec, max_revolutions=max_revolutions)


__all__ = [
    "SPEC_VERSION",
    "STAGE_KINDS",
    "IMPLICIT_METRICS",
    "Command",
    "Simulated",
    "Merge",
    "RunnerBinding",
    "StageSpec",
    "SpiralSpec",
    "ValidatedSpec",
    "MetricValue",
    "MetricSnapshot",
    "SpecError",
    "validate_spec",
    "ensure_valid",
    "validate_traverse_target",
    "spec_to_json",
    "spec_from_json",
    "load_spec",
    "save_spec",
    "spec_digest",
    "snapshot_values",
    "snapshot_to_json",
    "snapshot_from_json",
    "with_budget",
]

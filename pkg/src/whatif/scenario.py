"""Scenario declaration and compilation to linear constraint rows.

A scenario is a list of constraints on weighted statistics of the data
(e.g. "double the male share", "average male age 65"). Compilation turns
each constraint into one linear row over observation weights:
sum_n w_n * a_k(X_n) {=, <=, >=} b_k, valid for weights on the simplex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import jsonschema
import numpy as np

from whatif.dataset import DataError, Dataset

STATISTICS = ("weighted-mean", "weighted-proportion", "conditional-mean", "count-multiplier")
RELATIONS = ("eq", "le", "ge")
TARGET_MODES = ("absolute", "multiple-of-baseline", "lift-percent")

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["constraints"],
    "properties": {
        "constraints": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["feature", "statistic", "relation", "target"],
                "properties": {
                    "label": {"type": "string"},
                    "feature": {"type": "string"},
                    "condition": {"type": "string"},
                    "statistic": {"enum": list(STATISTICS)},
                    "relation": {"enum": list(RELATIONS)},
                    "target": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["mode", "value"],
                        "properties": {
                            "mode": {"enum": list(TARGET_MODES)},
                            "value": {"type": "number"},
                        },
                    },
                },
            },
        }
    },
}


class ScenarioError(ValueError):
    """Invalid scenario document or constraint specification."""


class InfeasibleConstraintError(ValueError):
    """A constraint target is unreachable for any weights on the simplex.

    Raised by the compile-time range pre-check (necessary condition);
    joint infeasibility across constraints is left to the solver.
    """

    def __init__(self, labels: Sequence[str], detail: str):
        super().__init__(f"infeasible constraint(s) {list(labels)}: {detail}")
        self.offending_labels = tuple(labels)
        self.evidence = "range-violation"
        self.detail = detail


@dataclass(frozen=True)
class TargetSpec:
    """Constraint target: absolute, a multiple of baseline, or a percent lift."""

    mode: str
    value: float

    def __post_init__(self) -> None:
        if self.mode not in TARGET_MODES:
            raise ScenarioError(f"unknown target mode {self.mode!r}")

    def resolve(self, baseline: float) -> float:
        if self.mode == "absolute":
            return float(self.value)
        if self.mode == "multiple-of-baseline":
            return float(self.value * baseline)
        return float(baseline * (1.0 + self.value / 100.0))


@dataclass(frozen=True)
class ConstraintSpec:
    """One declarative constraint on a weighted statistic."""

    feature: str
    statistic: str
    relation: str
    target: TargetSpec
    condition: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.statistic not in STATISTICS:
            raise ScenarioError(f"unknown statistic {self.statistic!r}")
        if self.relation not in RELATIONS:
            raise ScenarioError(f"unknown relation {self.relation!r}")
        if self.statistic == "conditional-mean" and self.condition is None:
            raise ScenarioError("conditional-mean requires a condition column")
        if self.statistic == "count-multiplier":
            if self.relation != "eq":
                raise ScenarioError("count-multiplier requires relation eq")
            if self.target.mode != "multiple-of-baseline":
                raise ScenarioError("count-multiplier requires mode multiple-of-baseline")
            if self.target.value <= 0:
                raise ScenarioError("count-multiplier requires a positive multiplier")

    def display_label(self) -> str:
        if self.label:
            return self.label
        cond = f"|{self.condition}" if self.condition else ""
        return (
            f"{self.statistic}({self.feature}{cond}) {self.relation} "
            f"{self.target.mode}:{self.target.value:g}"
        )


@dataclass(frozen=True)
class CompiledConstraints:
    """K linear constraint rows over N observation weights."""

    rows: np.ndarray  # (K, N)
    targets: np.ndarray  # (K,)
    relations: tuple[str, ...]
    labels: tuple[str, ...]

    @property
    def k(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n(self) -> int:
        return int(self.rows.shape[1])


def parse_scenario(text: str) -> list[ConstraintSpec]:
    """Parse a scenario JSON document into constraint specs (order kept)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ScenarioError(f"scenario schema violation at {path}: {exc.message}") from None

    specs = []
    for c in doc["constraints"]:
        specs.append(
            ConstraintSpec(
                feature=c["feature"],
                statistic=c["statistic"],
                relation=c["relation"],
                target=TargetSpec(c["target"]["mode"], c["target"]["value"]),
                condition=c.get("condition"),
                label=c.get("label"),
            )
        )
    labels = [s.display_label() for s in specs]
    dupes = {l for l in labels if labels.count(l) > 1}
    if dupes:
        raise ScenarioError(f"duplicate constraint labels: {sorted(dupes)}")
    return specs


def scenario_to_json(specs: Sequence[ConstraintSpec]) -> str:
    """Serialize constraint specs back to the scenario document format."""
    out = []
    for s in specs:
        c: dict = {
            "feature": s.feature,
            "statistic": s.statistic,
            "relation": s.relation,
            "target": {"mode": s.target.mode, "value": s.target.value},
        }
        if s.condition is not None:
            c["condition"] = s.condition
        if s.label is not None:
            c["label"] = s.label
        out.append(c)
    return json.dumps({"constraints": out})


def count_multiplier_to_proportion(gamma: float, p: float) -> float:
    """Post-change share of a subgroup whose count is multiplied by gamma.

    With normalized weights, multiplying the subgroup count by gamma while
    leaving others unchanged moves its share from p to gamma*p / (1 + (gamma-1)*p).
    """
    if gamma <= 0:
        raise ScenarioError("multiplier must be positive")
    if not 0.0 <= p <= 1.0:
        raise ScenarioError("baseline proportion must be in [0, 1]")
    return gamma * p / (1.0 + (gamma - 1.0) * p)


def _baseline_statistic(spec: ConstraintSpec, ds: Dataset) -> float:
    f = ds.column(spec.feature)
    if spec.statistic == "conditional-mean":
        mask = _condition_mask(spec, ds)
        return float(f[mask].mean())
    return float(f.mean())


def _condition_mask(spec: ConstraintSpec, ds: Dataset) -> np.ndarray:
    assert spec.condition is not None
    cspec = ds.spec(spec.condition)
    if not cspec.is_indicator:
        raise ScenarioError(f"condition column {spec.condition!r} is not an indicator")
    mask = ds.column(spec.condition) == 1.0
    if not mask.any():
        raise ScenarioError(f"condition column {spec.condition!r} selects no rows")
    return mask


def resolve_targets(specs: Sequence[ConstraintSpec], ds: Dataset) -> list[ConstraintSpec]:
    """Resolve relative targets against ``ds`` into absolute ones.

    count-multiplier becomes an absolute weighted-proportion target. Used
    so bootstrap resamples all chase the same absolute target as the full
    dataset.
    """
    out = []
    for spec in specs:
        if spec.statistic == "count-multiplier":
            fspec = ds.spec(spec.feature)
            if not fspec.is_indicator:
                raise ScenarioError(
                    f"count-multiplier requires an indicator feature, got {spec.feature!r}"
                )
            p = float(ds.column(spec.feature).mean())
            v = count_multiplier_to_proportion(spec.target.value, p)
            out.append(
                ConstraintSpec(
                    feature=spec.feature,
                    statistic="weighted-proportion",
                    relation="eq",
                    target=TargetSpec("absolute", v),
                    label=spec.display_label(),
                )
            )
        elif spec.target.mode == "absolute":
            out.append(spec)
        else:
            v = spec.target.resolve(_baseline_statistic(spec, ds))
            out.append(
                ConstraintSpec(
                    feature=spec.feature,
                    statistic=spec.statistic,
                    relation=spec.relation,
                    target=TargetSpec("absolute", v),
                    condition=spec.condition,
                    label=spec.display_label(),
                )
            )
    return out


def _check_range(label: str, relation: str, target: float, lo: float, hi: float, what: str) -> None:
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    if relation in ("eq", "ge") and target > hi + eps:
        raise InfeasibleConstraintError(
            [label], f"target {target:g} above the maximum achievable {what} {hi:g}"
        )
    if relation in ("eq", "le") and target < lo - eps:
        raise InfeasibleConstraintError(
            [label], f"target {target:g} below the minimum achievable {what} {lo:g}"
        )


def compile_constraints(specs: Sequence[ConstraintSpec], ds: Dataset) -> CompiledConstraints:
    """Compile constraint specs against a dataset into linear rows.

    Relative targets are resolved against ``ds``. A per-constraint range
    pre-check rejects targets outside the achievable range (a necessary
    feasibility condition only).
    """
    resolved = resolve_targets(specs, ds)
    rows = []
    targets = []
    relations = []
    labels = []
    for spec in resolved:
        label = spec.display_label()
        f = ds.column(spec.feature)
        fspec = ds.spec(spec.feature)
        v = spec.target.value  # absolute after resolution
        if spec.statistic == "weighted-mean":
            if fspec.kind == "metric":
                raise ScenarioError(f"constraint {label!r}: cannot constrain metric column")
            _check_range(label, spec.relation, v, float(f.min()), float(f.max()), "mean")
            rows.append(f)
            targets.append(v)
        elif spec.statistic == "weighted-proportion":
            if not fspec.is_indicator:
                raise ScenarioError(
                    f"constraint {label!r}: weighted-proportion requires an indicator feature"
                )
            _check_range(label, spec.relation, v, float(f.min()), float(f.max()), "proportion")
            rows.append(f)
            targets.append(v)
        elif spec.statistic == "conditional-mean":
            mask = _condition_mask(spec, ds)
            _check_range(
                label, spec.relation, v,
                float(f[mask].min()), float(f[mask].max()), "conditional mean",
            )
            rows.append(np.where(mask, f - v, 0.0))
            targets.append(0.0)
        else:  # count-multiplier was rewritten by resolve_targets
            raise ScenarioError(f"unresolved statistic {spec.statistic!r}")
        relations.append(spec.relation)
        labels.append(label)

    if rows:
        matrix = np.vstack([np.asarray(r, dtype=np.float64) for r in rows])
    else:
        matrix = np.zeros((0, ds.n_rows))
    return CompiledConstraints(
        rows=matrix,
        targets=np.asarray(targets, dtype=np.float64),
        relations=tuple(relations),
        labels=tuple(labels),
    )

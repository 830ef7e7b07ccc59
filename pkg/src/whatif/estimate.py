"""Scenario predictions of target metrics with bootstrap uncertainty.

The point prediction is the weighted metric mean sum_n w_n t_n; the
bootstrap repeats resample -> compile -> solve -> estimate over B
resamples to produce a distribution of predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from whatif.dataset import Dataset, ResamplePlan, resample
from whatif.maxent import SolverConfig, SolverResult, solve
from whatif.scenario import (
    CompiledConstraints,
    ConstraintSpec,
    InfeasibleConstraintError,
    compile_constraints,
    resolve_targets,
)

FRAGILITY_THRESHOLD = 0.05  # warn when more than 5% of resamples are infeasible


class EstimateError(ValueError):
    pass


@dataclass(frozen=True)
class PointEstimate:
    metric: str
    value: float
    entropy: float
    ess: float
    status: str


@dataclass
class BootstrapDistribution:
    metric: str
    values: list[float]  # converged resamples only, in resample-index order
    B_requested: int
    infeasible_fraction: float
    summary: dict[str, float]
    histogram: dict[str, list[float]]  # {"edges": [...], "counts": [...]}
    warnings: list[str] = field(default_factory=list)


def point_estimate(weights: np.ndarray, ds: Dataset, metric: str) -> PointEstimate:
    """Weighted metric mean under the given simplex weights."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[0] != ds.n_rows:
        raise EstimateError(f"weights length {w.shape[0]} != N={ds.n_rows}")
    t = ds.column(metric)
    nz = w[w > 0]
    return PointEstimate(
        metric=metric,
        value=float(w @ t),
        entropy=float(-np.sum(nz * np.log(nz))),
        ess=float(1.0 / np.sum(w * w)),
        status="converged",
    )


def summarize(values: Sequence[float], bins: int = 20) -> tuple[dict[str, float], dict[str, list[float]]]:
    """Mean/median/sd (n-1)/q05/q95 plus an equal-width histogram."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EstimateError("cannot summarize empty values")
    if bins < 1:
        raise EstimateError("bins must be >= 1")
    summary = {
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        "q05": float(np.quantile(arr, 0.05)),
        "q95": float(np.quantile(arr, 0.95)),
    }
    counts, edges = np.histogram(arr, bins=bins)
    return summary, {"edges": edges.tolist(), "counts": counts.tolist()}


def bootstrap_estimate(
    ds: Dataset,
    scenario: Sequence[ConstraintSpec],
    metric: str,
    plan: ResamplePlan,
    cfg: SolverConfig = SolverConfig(),
    bins: int = 20,
) -> BootstrapDistribution:
    """Distribution of scenario predictions over resamples.

    Relative targets are resolved against the full dataset once, so every
    resample chases the same absolute target. Infeasible resamples are
    excluded from the values and reported via infeasible_fraction.
    """
    resolved = resolve_targets(scenario, ds)  # raises if the scenario cannot compile
    compile_constraints(resolved, ds)  # full-dataset feasibility pre-check

    values: list[float] = []
    infeasible = 0
    for index in range(plan.B):
        sub = resample(ds, plan, index)
        try:
            cons = compile_constraints(resolved, sub)
        except InfeasibleConstraintError:
            infeasible += 1
            continue
        result = solve(cons, cfg)
        if result.status != "converged":
            infeasible += 1
            continue
        values.append(point_estimate(result.weights, sub, metric).value)

    if not values:
        raise EstimateError("all resamples infeasible")
    frac = infeasible / plan.B
    warnings = []
    if frac > FRAGILITY_THRESHOLD:
        warnings.append(
            f"{infeasible} of {plan.B} resamples infeasible "
            f"({frac:.1%}); the scenario is fragile under resampling"
        )
    summary, histogram = summarize(values, bins=bins)
    return BootstrapDistribution(
        metric=metric,
        values=values,
        B_requested=plan.B,
        infeasible_fraction=frac,
        summary=summary,
        histogram=histogram,
        warnings=warnings,
    )


def distribution_to_dict(dist: BootstrapDistribution) -> dict:
    return {
        "metric": dist.metric,
        "B_requested": dist.B_requested,
        "infeasible_fraction": dist.infeasible_fraction,
        "summary": dist.summary,
        "histogram": dist.histogram,
        "warnings": dist.warnings,
        "values": dist.values,
    }

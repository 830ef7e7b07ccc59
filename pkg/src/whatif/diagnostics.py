"""Reliability diagnostics for solved scenarios.

Concentrated weights mean the prediction leans on few observations.
These diagnostics expose that: relative weights (N*w, 1 = unchanged
importance), effective sample size 1/sum(w^2), entropy ratio, outlier
counts, and Tukey boxplot stats of the relative weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from whatif.dataset import Dataset
from whatif.maxent import SolverConfig, SolverResult, solve
from whatif.scenario import (
    ConstraintSpec,
    InfeasibleConstraintError,
    TargetSpec,
    compile_constraints,
)

DEFAULT_OUTLIER_THRESHOLD = 10.0
ESS_WARNING_RATIO = 0.1


class DiagnosticsError(ValueError):
    pass


@dataclass
class WeightDiagnostics:
    relative_weights: np.ndarray
    min: float
    max: float
    quantiles: dict[str, float]  # keys "1", "25", "50", "75", "99"
    ess: float
    ess_ratio: float
    entropy_ratio: float
    outlier_count: int
    threshold: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, include_weights: bool = False) -> dict:
        out = {
            "min": self.min,
            "max": self.max,
            "quantiles": self.quantiles,
            "ess": self.ess,
            "ess_ratio": self.ess_ratio,
            "entropy_ratio": self.entropy_ratio,
            "outlier_count": self.outlier_count,
            "threshold": self.threshold,
            "warnings": self.warnings,
        }
        if include_weights:
            out["relative_weights"] = self.relative_weights.tolist()
        return out


@dataclass(frozen=True)
class BoxplotStats:
    label: str
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
        }


def diagnose(result: SolverResult, threshold: float = DEFAULT_OUTLIER_THRESHOLD) -> WeightDiagnostics:
    """Weight-distribution diagnostics for a converged solve."""
    if result.status != "converged":
        raise DiagnosticsError(f"cannot diagnose a {result.status} result")
    w = result.weights
    n = w.shape[0]
    rel = n * w
    ess = float(1.0 / np.sum(w * w))
    entropy_ratio = 1.0 if n == 1 else float(result.entropy / math.log(n))
    outliers = int(np.sum(rel > threshold))
    warnings = list(result.warnings)
    if ess / n < ESS_WARNING_RATIO:
        warnings.append(
            f"effective sample size {ess:.1f} is below {ESS_WARNING_RATIO:.0%} of N={n}; "
            "the prediction leans on few observations"
        )
    if outliers > 0:
        warnings.append(
            f"{outliers} observation(s) carry relative weight above {threshold:g}"
        )
    qs = np.quantile(rel, [0.01, 0.25, 0.50, 0.75, 0.99])
    return WeightDiagnostics(
        relative_weights=rel,
        min=float(rel.min()),
        max=float(rel.max()),
        quantiles={"1": float(qs[0]), "25": float(qs[1]), "50": float(qs[2]),
                   "75": float(qs[3]), "99": float(qs[4])},
        ess=ess,
        ess_ratio=ess / n,
        entropy_ratio=entropy_ratio,
        outlier_count=outliers,
        threshold=threshold,
        warnings=warnings,
    )


def boxplot_stats(values: Sequence[float], label: str = "") -> BoxplotStats:
    """Tukey boxplot: linear-interpolation quartiles, whiskers at the last
    datum within 1.5*IQR of the box."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DiagnosticsError("cannot compute boxplot of empty values")
    q1, med, q3 = (float(q) for q in np.quantile(arr, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = arr[(arr < lo_fence) | (arr > hi_fence)]
    return BoxplotStats(
        label=label,
        median=med,
        q1=q1,
        q3=q3,
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=tuple(sorted(float(v) for v in outliers)),
    )


def spread_curve(
    ds: Dataset,
    features: Sequence[str],
    multiples: Sequence[float],
    cfg: SolverConfig = SolverConfig(),
) -> list[tuple[float, BoxplotStats | None]]:
    """Relative-weight boxplots as constraint targets move away from baseline.

    For each multiple m, every listed feature's weighted mean is pinned at
    m times its baseline mean; infeasible multiples are recorded as None.
    """
    if any(m <= 0 for m in multiples):
        raise DiagnosticsError("multiples must be positive")
    out: list[tuple[float, BoxplotStats | None]] = []
    for m in multiples:
        specs = [
            ConstraintSpec(
                feature=f,
                statistic="weighted-mean",
                relation="eq",
                target=TargetSpec("multiple-of-baseline", m),
            )
            for f in features
        ]
        try:
            cons = compile_constraints(specs, ds)
        except InfeasibleConstraintError:
            out.append((float(m), None))
            continue
        result = solve(cons, cfg)
        if result.status != "converged":
            out.append((float(m), None))
            continue
        rel = ds.n_rows * result.weights
        out.append((float(m), boxplot_stats(rel, label=f"multiple {m:g}")))
    return out

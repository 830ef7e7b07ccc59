"""Nearest-neighbor propensity matching baseline.

When the full treatment dataset is available, matching each treatment
row to its most similar control row gives an estimate to validate
scenario predictions against. Propensity scores come from a logistic
regression of branch membership on standardized features; matching is
1:1 greedy without replacement in descending propensity order.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from whatif.dataset import DataError, Dataset

RIDGE = 1e-8
MAX_ITERS = 100
COEF_TOL = 1e-8
DIVERGENCE_COEF_NORM = 1e4


class MatchingError(ValueError):
    pass


@dataclass(frozen=True)
class PropensityModel:
    feature_names: tuple[str, ...]
    coefficients: np.ndarray  # on the standardized feature scale
    intercept: float
    standardization: dict[str, tuple[float, float]]  # name -> (mean, sd)
    converged: bool
    iterations: int

    def scores(self, ds: Dataset) -> np.ndarray:
        """Propensity P(treatment | features) per row, probability scale."""
        z = np.full(ds.n_rows, self.intercept)
        for name, coef in zip(self.feature_names, self.coefficients):
            mean, sd = self.standardization[name]
            z += coef * (ds.column(name) - mean) / sd
        return _sigmoid(z)


@dataclass
class MatchResult:
    pairs: list[tuple[int, int]]  # (treatment row index, control row index)
    unmatched_treatment: int
    estimate: float
    caliper: Optional[float]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_propensity(
    control: Dataset, treatment: Dataset, features: Sequence[str]
) -> PropensityModel:
    """Logistic regression of branch membership (treatment=1) on features.

    Features are standardized on the pooled data; fitting is IRLS with a
    small ridge. Separation shows up as non-convergence and is reported
    with the partial coefficients.
    """
    if control.n_rows < 1 or treatment.n_rows < 1:
        raise MatchingError("both branches need at least one row")
    for name in features:
        for ds, branch in ((control, "control"), (treatment, "treatment")):
            if ds.spec(name).kind == "metric":
                raise MatchingError(
                    f"metric column {name!r} cannot be a propensity feature "
                    f"(it is the quantity being predicted)"
                )
            ds.column(name)  # existence check in both branches

    cols = []
    standardization = {}
    for name in features:
        pooled = np.concatenate([control.column(name), treatment.column(name)])
        mean = float(pooled.mean())
        sd = float(pooled.std())
        if sd == 0.0:
            raise MatchingError(f"feature {name!r} is constant; cannot standardize")
        standardization[name] = (mean, sd)
        cols.append((pooled - mean) / sd)
    x = np.column_stack([np.ones(control.n_rows + treatment.n_rows)] + cols)
    y = np.concatenate([np.zeros(control.n_rows), np.ones(treatment.n_rows)])

    beta = np.zeros(x.shape[1])
    converged = False
    iters = 0
    for iters in range(1, MAX_ITERS + 1):
        p = _sigmoid(x @ beta)
        wdiag = p * (1.0 - p)
        h = (x * wdiag[:, None]).T @ x
        h[np.diag_indices_from(h)] += RIDGE
        step = np.linalg.solve(h, x.T @ (y - p))
        beta = beta + step
        if np.linalg.norm(beta) > DIVERGENCE_COEF_NORM:
            break
        if np.linalg.norm(step, np.inf) < COEF_TOL:
            converged = True
            break

    return PropensityModel(
        feature_names=tuple(features),
        coefficients=beta[1:].copy(),
        intercept=float(beta[0]),
        standardization=standardization,
        converged=converged,
        iterations=iters,
    )


def _greedy_pairs(
    t_scores: np.ndarray, c_scores: np.ndarray, caliper_abs: Optional[float]
) -> tuple[list[tuple[int, int]], int]:
    """Greedy 1:1 matching on scores, without replacement.

    Treatment rows are processed in descending score (ties by ascending
    row index); each takes the unused control row with the nearest score,
    ties broken by lowest control row index. Rows whose nearest neighbor
    exceeds the caliper stay unmatched.
    """
    n_c = c_scores.shape[0]
    order_c = sorted(range(n_c), key=lambda i: (c_scores[i], i))
    ss = [float(c_scores[i]) for i in order_c]
    used = [False] * n_c
    matched_count = 0
    # "next live" pointers with path compression, in sorted-score order
    jump_right = list(range(1, n_c + 1))
    jump_left = list(range(-1, n_c))

    def find_right(p: int) -> int:
        path = []
        while 0 <= p < n_c and used[p]:
            path.append(p)
            p = jump_right[p]
        for q in path:
            jump_right[q] = p
        return p  # n_c means none

    def find_left(p: int) -> int:
        path = []
        while 0 <= p < n_c and used[p]:
            path.append(p)
            p = jump_left[p]
        for q in path:
            jump_left[q] = p
        return p  # -1 means none

    pairs: list[tuple[int, int]] = []
    unmatched = 0
    t_order = sorted(range(t_scores.shape[0]), key=lambda i: (-t_scores[i], i))
    for ti in t_order:
        if matched_count == n_c:
            unmatched += 1
            continue
        s = float(t_scores[ti])
        pos = bisect_left(ss, s)
        r = find_right(pos)
        l = find_left(pos - 1)
        dists = []
        if l >= 0:
            dists.append(abs(ss[l] - s))
        if r < n_c:
            dists.append(abs(ss[r] - s))
        best = min(dists)
        if caliper_abs is not None and best > caliper_abs:
            unmatched += 1
            continue
        # gather all live candidates at exactly the best distance (equal-score
        # runs on either side) and take the lowest original row index
        tied: list[int] = []
        p = l
        while p >= 0 and abs(ss[p] - s) == best:
            tied.append(p)
            p = find_left(p - 1)
        p = r
        while p < n_c and abs(ss[p] - s) == best:
            tied.append(p)
            p = find_right(p + 1)
        chosen = min(tied, key=lambda c: order_c[c])
        used[chosen] = True
        matched_count += 1
        pairs.append((ti, order_c[chosen]))
    return pairs, unmatched


def greedy_match(
    model: PropensityModel,
    control: Dataset,
    treatment: Dataset,
    metric: Optional[str] = None,
    caliper: Optional[float] = None,
) -> MatchResult:
    """Match treatment rows to control rows on propensity score.

    The caliper is in units of the pooled score standard deviation;
    treatment rows with no unused control inside it stay unmatched.
    The estimate is the mean of the metric over matched control rows
    (first metric column if none named).
    """
    if control.n_rows == 0:
        raise MatchingError("control pool is empty")
    c_scores = model.scores(control)
    t_scores = model.scores(treatment)
    caliper_abs = None
    if caliper is not None:
        pooled_sd = float(np.concatenate([c_scores, t_scores]).std())
        caliper_abs = caliper * pooled_sd
    pairs, unmatched = _greedy_pairs(t_scores, c_scores, caliper_abs)
    metric = metric or control.metric_names[0]
    if pairs:
        idx = np.array([c for _, c in pairs], dtype=np.intp)
        estimate = float(control.column(metric)[idx].mean())
    else:
        estimate = math.nan
    return MatchResult(pairs=pairs, unmatched_treatment=unmatched,
                       estimate=estimate, caliper=caliper)


def matched_estimate(result: MatchResult, control: Dataset, metric: str) -> float:
    """Unweighted mean of a metric over matched control rows."""
    if not result.pairs:
        raise MatchingError("no matched pairs")
    idx = np.array([c for _, c in result.pairs], dtype=np.intp)
    return float(control.column(metric)[idx].mean())

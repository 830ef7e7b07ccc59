"""Maximum-entropy weight solver.

Maximizes Shannon entropy of observation weights on the simplex subject
to compiled linear equality/inequality rows. Equalities are solved by
damped Newton on the convex dual psi(lam) = log sum_n exp(lam . (a_n - b));
the primal weights are w_n proportional to exp(lam . a_n). Inequalities
are handled by an active-set loop around the equality solver.

The dual dimension equals the constraint count (small in practice), so
Newton with the exact weighted-covariance Hessian is fast at any N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from whatif.scenario import CompiledConstraints, InfeasibleConstraintError


@dataclass(frozen=True)
class SolverConfig:
    max_newton_iters: int = 200
    grad_tol: float = 1e-9  # infinity norm of the dual gradient
    hessian_ridge: float = 1e-10
    backtrack_factor: float = 0.5
    backtrack_decrease: float = 1e-4
    max_backtracks: int = 50
    divergence_norm: float = 1e6  # on |lam|; beyond this the dual is deemed unbounded
    active_set_max_passes: Optional[int] = None  # default 2*K_ineq + 2

    def __post_init__(self) -> None:
        if not (0 < self.grad_tol < 1):
            raise ValueError("grad_tol must be in (0, 1)")
        if self.divergence_norm <= 1:
            raise ValueError("divergence_norm must exceed 1")
        for name in ("max_newton_iters", "hessian_ridge", "backtrack_factor",
                     "backtrack_decrease", "max_backtracks"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class InfeasibilityReport:
    offending_labels: tuple[str, ...]
    evidence: str  # "range-violation" | "dual-divergence"
    dual_norm_at_stop: float


@dataclass
class SolverResult:
    weights: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    entropy: float
    residuals: np.ndarray  # |resid| for eq rows, signed slack for inequalities
    iterations: int
    status: str  # "converged" | "infeasible" | "max-iters"
    warnings: list[str] = field(default_factory=list)
    infeasibility: Optional[InfeasibilityReport] = None


RESIDUAL_RTOL = 1e-6
SLACK_TOL = 1e-6
ACTIVATION_TOL = 1e-9
MULTIPLIER_TOL = 1e-8


def entropy(weights: np.ndarray) -> float:
    """Shannon entropy -sum w ln w in nats, with 0 ln 0 = 0."""
    w = np.asarray(weights, dtype=np.float64)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def _merge_duplicate_rows(rows, targets, labels, warnings):
    """Drop exact duplicates (same row, same target); returns kept indices."""
    keep: list[int] = []
    for i in range(rows.shape[0]):
        dup = None
        for j in keep:
            if targets[i] == targets[j] and np.array_equal(rows[i], rows[j]):
                dup = j
                break
        if dup is None:
            keep.append(i)
        else:
            warnings.append(
                f"constraint {labels[i]!r} duplicates {labels[dup]!r}; merged"
            )
    return keep


def _newton_dual(rows: np.ndarray, targets: np.ndarray, labels: Sequence[str],
                 cfg: SolverConfig):
    """Minimize psi(lam) = logsumexp(lam . (a_n - b)) by damped Newton.

    Returns (lam, weights, status, iterations, warnings, report).
    """
    k, n = rows.shape
    warnings: list[str] = []
    if k == 0:
        return (np.zeros(0), np.full(n, 1.0 / n), "converged", 0, warnings, None)

    keep = _merge_duplicate_rows(rows, targets, labels, warnings)
    a = rows[keep]
    b = targets[keep]
    kept_labels = [labels[i] for i in keep]
    c = a - b[:, None]
    lam_k = np.zeros(len(keep))

    def psi_and_weights(lam):
        z = lam @ c
        zmax = z.max()
        e = np.exp(z - zmax)
        s = e.sum()
        return zmax + math.log(s), e / s

    psi, w = psi_and_weights(lam_k)
    status = "max-iters"
    iters = 0
    for iters in range(1, cfg.max_newton_iters + 1):
        g = c @ w
        if np.linalg.norm(g, np.inf) < cfg.grad_tol:
            status = "converged"
            break
        if np.linalg.norm(lam_k) > cfg.divergence_norm:
            break
        cw = c * w
        hess = cw @ c.T - np.outer(g, g)
        hess[np.diag_indices_from(hess)] += cfg.hessian_ridge
        try:
            step = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = -g
        slope = float(g @ step)
        if slope >= 0:  # numerically not a descent direction; fall back
            step = -g
            slope = float(g @ step)
        t = 1.0
        for _ in range(cfg.max_backtracks):
            psi_new, w_new = psi_and_weights(lam_k + t * step)
            if psi_new <= psi + cfg.backtrack_decrease * t * slope:
                break
            t *= cfg.backtrack_factor
        lam_k = lam_k + t * step
        psi, w = psi_and_weights(lam_k)

    resid = a @ w - b
    rel = np.abs(resid) / np.maximum(1.0, np.abs(b))
    if status != "converged":
        if np.all(rel <= RESIDUAL_RTOL):
            # target on (or extremely near) the hull boundary: constraints hold
            # but the dual minimizer lies at infinity and weights concentrate.
            status = "converged"
            warnings.append(
                "weights concentrated near a constraint boundary; "
                "dual multipliers are large and the solution is fragile"
            )
        elif np.linalg.norm(lam_k) > cfg.divergence_norm:
            bad = [kept_labels[i] for i in np.flatnonzero(rel > RESIDUAL_RTOL)]
            report = InfeasibilityReport(
                offending_labels=tuple(bad or kept_labels),
                evidence="dual-divergence",
                dual_norm_at_stop=float(np.linalg.norm(lam_k)),
            )
            return (np.zeros(k), np.full(n, 1.0 / n), "infeasible", iters, warnings, report)

    if status == "converged" and n > 1 and n * w.min() < 1e-12:
        # boundary targets drive the dual toward infinity; Newton can still
        # meet the gradient tolerance there with essentially degenerate weights
        if not any("concentrated" in msg for msg in warnings):
            warnings.append(
                "weights concentrated near a constraint boundary; "
                "dual multipliers are large and the solution is fragile"
            )

    lam_full = np.zeros(k)
    for pos, i in enumerate(keep):
        lam_full[i] = lam_k[pos]
    return (lam_full, w, status, iters, warnings, None)


def solve_equalities(cons: CompiledConstraints, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Solve with equality rows only; K=0 returns exact uniform weights."""
    if any(r != "eq" for r in cons.relations):
        raise ValueError("solve_equalities accepts eq rows only")
    lam, w, status, iters, warnings, report = _newton_dual(
        cons.rows, cons.targets, cons.labels, cfg
    )
    resid = np.abs(cons.rows @ w - cons.targets) if cons.k else np.zeros(0)
    return SolverResult(
        weights=w,
        eq_multipliers=lam,
        ineq_multipliers=np.zeros(0),
        entropy=entropy(w),
        residuals=resid,
        iterations=iters,
        status=status,
        warnings=warnings,
        infeasibility=report,
    )


def solve(cons: CompiledConstraints, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Solve with mixed eq/le/ge rows via an active-set loop.

    Starts with all inequalities inactive; activates the most-violated
    inequality as an equality, deactivates active inequalities whose
    multiplier takes the wrong sign, and stops at a KKT point.
    """
    relations = cons.relations
    eq_idx = [i for i, r in enumerate(relations) if r == "eq"]
    ineq_idx = [i for i, r in enumerate(relations) if r != "eq"]
    k_ineq = len(ineq_idx)
    max_passes = cfg.active_set_max_passes or (2 * k_ineq + 2)

    active: list[int] = []  # positions into ineq_idx
    last = None
    status = "max-iters"
    total_iters = 0
    for _ in range(max_passes):
        sub = eq_idx + [ineq_idx[j] for j in active]
        lam, w, sub_status, iters, warnings, report = _newton_dual(
            cons.rows[sub] if sub else np.zeros((0, cons.n)),
            cons.targets[sub] if sub else np.zeros(0),
            [cons.labels[i] for i in sub],
            cfg,
        )
        total_iters += iters
        last = (lam, w, warnings, report, sub)
        if sub_status != "converged":
            status = sub_status
            break

        vals = cons.rows[ineq_idx] @ w if k_ineq else np.zeros(0)
        # violation > 0 means the inactive inequality is broken
        viol = np.array(
            [
                (vals[j] - cons.targets[ineq_idx[j]])
                if relations[ineq_idx[j]] == "le"
                else (cons.targets[ineq_idx[j]] - vals[j])
                for j in range(k_ineq)
            ]
        )
        inactive = [j for j in range(k_ineq) if j not in active]
        broken = [j for j in inactive if viol[j] > ACTIVATION_TOL]
        if broken:
            active.append(max(broken, key=lambda j: viol[j]))
            continue

        # multiplier sign check: mu = -lam for binding <=, +lam for binding >=
        wrong = None
        wrong_mu = -MULTIPLIER_TOL
        for pos, j in enumerate(active):
            lam_j = lam[len(eq_idx) + pos]
            mu = -lam_j if relations[ineq_idx[j]] == "le" else lam_j
            if mu < wrong_mu:
                wrong_mu = mu
                wrong = j
        if wrong is not None:
            active.remove(wrong)
            continue

        status = "converged"
        break

    assert last is not None
    lam, w, warnings, report, sub = last
    if status == "infeasible":
        return SolverResult(
            weights=w,
            eq_multipliers=np.zeros(len(eq_idx)),
            ineq_multipliers=np.zeros(k_ineq),
            entropy=entropy(w),
            residuals=np.zeros(cons.k),
            iterations=total_iters,
            status=status,
            warnings=warnings,
            infeasibility=report,
        )

    eq_mult = lam[: len(eq_idx)]
    ineq_mult = np.zeros(k_ineq)
    for pos, j in enumerate(active):
        lam_j = lam[len(eq_idx) + pos]
        ineq_mult[j] = -lam_j if relations[ineq_idx[j]] == "le" else lam_j
    ineq_mult = np.maximum(ineq_mult, 0.0)

    residuals = np.zeros(cons.k)
    vals_all = cons.rows @ w if cons.k else np.zeros(0)
    for i in range(cons.k):
        if relations[i] == "eq":
            residuals[i] = abs(vals_all[i] - cons.targets[i])
        elif relations[i] == "le":
            residuals[i] = cons.targets[i] - vals_all[i]  # signed slack
        else:
            residuals[i] = vals_all[i] - cons.targets[i]

    return SolverResult(
        weights=w,
        eq_multipliers=eq_mult,
        ineq_multipliers=ineq_mult,
        entropy=entropy(w),
        residuals=residuals,
        iterations=total_iters,
        status=status,
        warnings=warnings,
        infeasibility=report,
    )


def infeasible_result(cons_or_n, exc: InfeasibleConstraintError) -> SolverResult:
    """Wrap a compile-time range violation as an infeasible SolverResult."""
    n = cons_or_n if isinstance(cons_or_n, int) else cons_or_n.n
    report = InfeasibilityReport(
        offending_labels=exc.offending_labels,
        evidence="range-violation",
        dual_norm_at_stop=0.0,
    )
    return SolverResult(
        weights=np.full(n, 1.0 / max(n, 1)),
        eq_multipliers=np.zeros(0),
        ineq_multipliers=np.zeros(0),
        entropy=math.log(n) if n else 0.0,
        residuals=np.zeros(0),
        iterations=0,
        status="infeasible",
        warnings=[str(exc)],
        infeasibility=report,
    )

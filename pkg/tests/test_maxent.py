import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_solve, shannon_entropy
from whatif.dataset import ColumnSpec, Dataset
from whatif.maxent import SolverConfig, entropy, solve, solve_equalities
from whatif.scenario import (
    CompiledConstraints,
    ConstraintSpec,
    TargetSpec,
    compile_constraints,
)


def make_cons(rows, targets, relations=None, labels=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    k = rows.shape[0]
    return CompiledConstraints(
        rows=rows,
        targets=np.asarray(targets, dtype=float),
        relations=tuple(relations or ["eq"] * k),
        labels=tuple(labels or [f"c{i}" for i in range(k)]),
    )


class TestEntropy:
    def test_uniform_is_log_n(self):
        assert entropy(np.full(8, 1 / 8)) == pytest.approx(math.log(8))

    def test_one_hot_is_zero(self):
        w = np.zeros(5)
        w[2] = 1.0
        assert entropy(w) == 0.0

    def test_quarter_three_quarter(self):
        # -0.25 ln 0.25 - 0.75 ln 0.75
        assert entropy(np.array([0.25, 0.75])) == pytest.approx(0.5623351446188083)


class TestSolveEqualities:
    def test_no_constraints_exact_uniform(self):
        cons = make_cons(np.zeros((0, 10)), [])
        res = solve_equalities(cons)
        assert res.status == "converged"
        assert np.array_equal(res.weights, np.full(10, 0.1))

    def test_binary_tilt_closed_form(self):
        # two observations with a in {0, 1}, target mean 0.75:
        # w = (0.25, 0.75), lambda = ln 3 (e^l / (1 + e^l) = 0.75).
        # Cross-checked by a 1e-3 grid brute force below.
        cons = make_cons([[0.0, 1.0]], [0.75])
        res = solve_equalities(cons)
        assert res.status == "converged"
        assert np.allclose(res.weights, [0.25, 0.75], atol=1e-9)
        assert res.eq_multipliers[0] == pytest.approx(math.log(3), abs=1e-6)

    def test_binary_tilt_matches_grid_brute_force(self):
        grid = np.arange(1e-3, 1.0, 1e-3)
        feasible = grid[np.abs(grid - 0.75) < 5e-4]
        entropies = [-(1 - p) * math.log(1 - p) - p * math.log(p) for p in feasible]
        best = feasible[int(np.argmax(entropies))]
        cons = make_cons([[0.0, 1.0]], [0.75])
        res = solve_equalities(cons)
        assert res.weights[1] == pytest.approx(best, abs=1e-3)

    def test_table_doubled_males_exact_ratio(self, shoes):
        spec = ConstraintSpec(
            "is_male", "count-multiplier", "eq", TargetSpec("multiple-of-baseline", 2)
        )
        cons = compile_constraints([spec], shoes)
        res = solve_equalities(cons)
        rel = 7 * res.weights
        male = shoes.column("is_male") == 1
        assert np.allclose(rel[male], 14 / 11, atol=1e-9)
        assert np.allclose(rel[~male], 7 / 11, atol=1e-9)

    def test_baseline_target_gives_uniform(self, shoes):
        spec = ConstraintSpec(
            "age", "weighted-mean", "eq",
            TargetSpec("absolute", float(shoes.column("age").mean())),
        )
        res = solve_equalities(compile_constraints([spec], shoes))
        assert res.status == "converged"
        assert np.allclose(res.weights, 1 / 7, atol=1e-12)
        assert np.allclose(res.eq_multipliers, 0.0, atol=1e-9)

    def test_rejects_inequality_rows(self):
        cons = make_cons([[0.0, 1.0]], [0.5], relations=["le"])
        with pytest.raises(ValueError):
            solve_equalities(cons)

    def test_duplicate_rows_merged_with_warning(self):
        cons = make_cons([[0.0, 1.0], [0.0, 1.0]], [0.75, 0.75])
        res = solve_equalities(cons)
        assert res.status == "converged"
        assert any("merged" in w for w in res.warnings)
        assert np.allclose(res.weights, [0.25, 0.75], atol=1e-9)


class TestSolveActiveSet:
    def test_conditional_ge_binds(self, shoes):
        spec = ConstraintSpec(
            "age", "conditional-mean", "ge", TargetSpec("absolute", 65),
            condition="is_male",
        )
        cons = compile_constraints([spec], shoes)
        res = solve(cons)
        assert res.status == "converged"
        w = res.weights
        male = shoes.column("is_male") == 1
        cond_mean = (w[male] @ shoes.column("age")[male]) / w[male].sum()
        assert cond_mean == pytest.approx(65.0, abs=1e-6)
        assert res.ineq_multipliers[0] > 0
        # older males upweighted relative to younger ones
        ages = shoes.column("age")[male]
        weights_male = w[male]
        assert weights_male[np.argmax(ages)] > weights_male[np.argmin(ages)]
        # independent oracle agreement
        w_oracle = oracle_solve(cons.rows, cons.targets, cons.relations)
        assert abs(shannon_entropy(w_oracle) - res.entropy) < 1e-6
        assert np.max(np.abs(w_oracle - res.weights)) < 1e-4

    def test_slack_inequality_stays_uniform(self, shoes):
        # baseline male mean age is 64.5 >= 60 already
        spec = ConstraintSpec(
            "age", "conditional-mean", "ge", TargetSpec("absolute", 60),
            condition="is_male",
        )
        res = solve(compile_constraints([spec], shoes))
        assert res.status == "converged"
        assert np.allclose(res.weights, 1 / 7, atol=1e-12)
        assert res.ineq_multipliers[0] == 0.0

    def test_contradictory_equalities_infeasible(self, shoes):
        specs = [
            ConstraintSpec("age", "weighted-mean", "eq", TargetSpec("absolute", 90)),
            ConstraintSpec("age", "weighted-mean", "eq", TargetSpec("absolute", 50),
                           label="second"),
        ]
        res = solve(compile_constraints(specs, shoes))
        assert res.status == "infeasible"
        assert res.infeasibility is not None
        assert res.infeasibility.evidence == "dual-divergence"
        assert res.infeasibility.dual_norm_at_stop > 1.0
        assert len(res.infeasibility.offending_labels) >= 1

    def test_weights_on_simplex(self, shoes):
        spec = ConstraintSpec(
            "is_male", "count-multiplier", "eq", TargetSpec("multiple-of-baseline", 3)
        )
        res = solve(compile_constraints([spec], shoes))
        assert np.all(res.weights >= 0)
        assert abs(res.weights.sum() - 1.0) < 1e-12

    def test_converged_residuals_within_tolerance(self, shoes):
        specs = [
            ConstraintSpec("age", "weighted-mean", "eq", TargetSpec("absolute", 75)),
            ConstraintSpec("shoe_size", "weighted-mean", "le", TargetSpec("absolute", 47)),
        ]
        cons = compile_constraints(specs, shoes)
        res = solve(cons)
        assert res.status == "converged"
        assert res.residuals[0] <= 1e-6 * max(1.0, 75.0)
        assert res.residuals[1] >= -1e-6  # signed slack


class TestProperties:
    def _random_instance(self, trial):
        rng = np.random.default_rng([31, trial])
        n = int(rng.integers(5, 51))
        k = int(rng.integers(1, 4))
        rows = rng.normal(size=(k, n))
        w0 = rng.dirichlet(np.full(n, 5.0))
        relations = []
        targets = np.zeros(k)
        for i in range(k):
            rel = ("eq", "le", "ge")[int(rng.integers(0, 3))]
            v = float(rows[i] @ w0)
            if rel == "le" and rng.random() < 0.5:
                v += 0.05 * abs(rng.normal())
            if rel == "ge" and rng.random() < 0.5:
                v -= 0.05 * abs(rng.normal())
            relations.append(rel)
            targets[i] = v
        return make_cons(rows, targets, relations)

    def test_entropy_maximality_under_feasible_perturbations(self):
        cons = self._random_instance(0)
        res = solve(cons)
        assert res.status == "converged"
        # perturb within the null space of active rows and the all-ones row
        active_rows = [np.ones(cons.n)]
        vals = cons.rows @ res.weights
        for i in range(cons.k):
            if cons.relations[i] == "eq" or abs(vals[i] - cons.targets[i]) < 1e-7:
                active_rows.append(cons.rows[i])
        basis = np.vstack(active_rows)
        _, _, vt = np.linalg.svd(basis)
        null = vt[np.linalg.matrix_rank(basis):]
        rng = np.random.default_rng(8)
        for _ in range(1000):
            d = null.T @ rng.normal(size=null.shape[0])
            norm = np.linalg.norm(d)
            if norm == 0:
                continue
            d /= norm
            scale = 0.5 * res.weights.min()
            w2 = res.weights + scale * d
            assert np.all(w2 >= 0)
            assert entropy(w2) <= res.entropy + 1e-9

    def test_scale_robustness(self, shoes):
        spec = ConstraintSpec("age", "weighted-mean", "eq", TargetSpec("absolute", 75))
        cons = compile_constraints([spec], shoes)
        res1 = solve(cons)
        scaled = make_cons(cons.rows * 1000.0, cons.targets * 1000.0)
        res2 = solve(scaled)
        assert np.max(np.abs(res1.weights - res2.weights)) < 1e-9

    def test_uniform_within_group(self):
        # constraint rows are functions of a discrete group label only
        labels = np.array([0, 0, 1, 1, 1, 2, 2], dtype=float)
        cols = [ColumnSpec("g1", "indicator-feature"), ColumnSpec("t", "metric")]
        ds = Dataset(cols, {"g1": (labels == 1).astype(float), "t": np.arange(7.0)})
        spec = ConstraintSpec("g1", "weighted-proportion", "eq", TargetSpec("absolute", 0.6))
        res = solve(compile_constraints([spec], ds))
        w = res.weights
        assert np.ptp(w[labels == 1]) < 1e-15
        assert np.ptp(w[np.concatenate([np.where(labels == 0)[0], np.where(labels == 2)[0]])]) < 1e-15

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000))
    def test_oracle_equivalence_random_instances(self, trial):
        cons = self._random_instance(trial)
        res = solve(cons)
        assert res.status == "converged"
        w_oracle = oracle_solve(cons.rows, cons.targets, cons.relations)
        assert abs(shannon_entropy(w_oracle) - res.entropy) < 1e-6
        assert np.max(np.abs(w_oracle - res.weights)) < 1e-4


class TestBoundaryTargets:
    def test_hull_boundary_converges_with_warning(self):
        # target equal to the row maximum: mass concentrates on the max row
        cons = make_cons([[0.0, 1.0, 2.0]], [2.0])
        res = solve_equalities(cons)
        assert res.status == "converged"
        assert any("concentrated" in w for w in res.warnings)
        assert res.weights[2] > 0.999

import numpy as np
import pytest

from whatif.dataset import ColumnSpec, Dataset, ResamplePlan
from whatif.scenario import ConstraintSpec, TargetSpec
from whatif.sweep import (
    SweepAxis,
    SweepError,
    exchange_rate,
    sweep_1d,
    sweep_2d,
    sweep_to_dict,
)


def lift_axis(feature, grid):
    template = ConstraintSpec(
        feature, "weighted-mean", "eq", TargetSpec("lift-percent", 0.0)
    )
    return SweepAxis(template, tuple(grid))


@pytest.fixture
def linear_ds():
    """Metric is exactly x_a - x_b, so sweep medians are predictable."""
    rng = np.random.default_rng(42)
    n = 4000
    xa = rng.normal(10.0, 2.0, n)
    xb = rng.normal(5.0, 1.5, n)
    cols = [
        ColumnSpec("xa", "numeric-feature"),
        ColumnSpec("xb", "numeric-feature"),
        ColumnSpec("t", "metric"),
    ]
    return Dataset(cols, {"xa": xa, "xb": xb, "t": xa - xb})


class TestSweepAxis:
    def test_monotone_grid_required(self):
        with pytest.raises(SweepError, match="monotone"):
            lift_axis("xa", [0.0, 2.0, 1.0])
        with pytest.raises(SweepError, match="non-empty"):
            lift_axis("xa", [])

    def test_instantiate_keeps_mode(self):
        ax = lift_axis("xa", [0.0, 5.0])
        c = ax.instantiate(5.0)
        assert c.target.mode == "lift-percent"
        assert c.target.value == 5.0
        assert c.feature == "xa"


class TestSweep1d:
    def test_zero_lift_cell_centers_on_baseline(self, linear_ds):
        res = sweep_1d(linear_ds, lift_axis("xa", [0.0, 2.0, 4.0]), "t")
        baseline = linear_ds.column("t").mean()
        cell0 = res.cells[0]
        assert abs(cell0.summary["median"] - baseline) <= cell0.summary["sd"]

    def test_medians_increase_with_lift(self, linear_ds):
        res = sweep_1d(linear_ds, lift_axis("xa", [0.0, 2.0, 4.0]), "t")
        medians = [c.summary["median"] for c in res.cells]
        assert medians[0] < medians[1] < medians[2]

    def test_shared_seeds_across_cells(self, linear_ds):
        # two sweeps with the same plan give identical cells
        plan = ResamplePlan("bootstrap-with-replacement", B=10, m=1000, seed=9)
        r1 = sweep_1d(linear_ds, lift_axis("xa", [0.0, 2.0]), "t", plan=plan)
        r2 = sweep_1d(linear_ds, lift_axis("xa", [0.0, 2.0]), "t", plan=plan)
        assert [c.values for c in r1.cells] == [c.values for c in r2.cells]

    def test_infeasible_cell_recorded(self, linear_ds):
        res = sweep_1d(linear_ds, lift_axis("xa", [0.0, 500.0]), "t")
        assert res.cells[0].summary is not None
        bad = res.cells[1]
        assert bad.summary is None
        assert bad.infeasible_fraction == 1.0
        assert bad.boxplot is None

    def test_base_scenario_applies_everywhere(self, linear_ds):
        base = [ConstraintSpec("xb", "weighted-mean", "eq",
                               TargetSpec("lift-percent", 10.0))]
        res = sweep_1d(linear_ds, lift_axis("xa", [0.0]), "t", base_scenario=base)
        shifted = res.cells[0].summary["median"]
        expected = linear_ds.column("t").mean() - 0.10 * linear_ds.column("xb").mean()
        assert shifted == pytest.approx(expected, abs=4 * res.cells[0].summary["sd"])


class TestSweep2d:
    def test_grid_is_row_major(self, linear_ds):
        res = sweep_2d(linear_ds, lift_axis("xa", [0.0, 2.0]),
                       lift_axis("xb", [0.0, 3.0]), "t")
        assert res.grid_shape == (2, 2)
        assert [(c.a_value, c.b_value) for c in res.cells] == [
            (0.0, 0.0), (0.0, 3.0), (2.0, 0.0), (2.0, 3.0),
        ]

    def test_medians_follow_linear_structure(self, linear_ds):
        res = sweep_2d(linear_ds, lift_axis("xa", [0.0, 2.0]),
                       lift_axis("xb", [0.0, 4.0]), "t")
        xa_m = linear_ds.column("xa").mean()
        xb_m = linear_ds.column("xb").mean()
        for cell in res.cells:
            expected = (1 + cell.a_value / 100) * xa_m - (1 + cell.b_value / 100) * xb_m
            assert cell.summary["median"] == pytest.approx(
                expected, abs=4 * max(cell.summary["sd"], 1e-3)
            )


class TestExchangeRate:
    def test_contour_matches_linear_tradeoff(self, linear_ds):
        # t = xa - xb, so the iso-level contour satisfies
        # (1+a/100)*E[xa] - (1+b/100)*E[xb] = level
        grid_a = [0.0, 1.0, 2.0, 3.0]
        grid_b = [0.0, 2.0, 4.0, 6.0]
        res = sweep_2d(linear_ds, lift_axis("xa", grid_a),
                       lift_axis("xb", grid_b), "t")
        xa_m = linear_ds.column("xa").mean()
        xb_m = linear_ds.column("xb").mean()
        level = xa_m - xb_m + 0.015 * xa_m  # reachable from every a-row
        contour = exchange_rate(res, level)
        assert contour
        for a_val, b_val in contour:
            b_exact = 100 * (((1 + a_val / 100) * xa_m - level) / xb_m - 1)
            assert b_val == pytest.approx(b_exact, abs=1.0)

    def test_level_outside_range_warns_and_returns_empty(self, linear_ds):
        res = sweep_2d(linear_ds, lift_axis("xa", [0.0, 1.0]),
                       lift_axis("xb", [0.0, 1.0]), "t")
        with pytest.warns(UserWarning, match="empty contour"):
            assert exchange_rate(res, 1e9) == []

    def test_requires_2d(self, linear_ds):
        res = sweep_1d(linear_ds, lift_axis("xa", [0.0]), "t")
        with pytest.raises(SweepError):
            exchange_rate(res, 0.0)


def test_sweep_to_dict_json_round_trip(linear_ds):
    import json

    res = sweep_1d(linear_ds, lift_axis("xa", [0.0, 1.0]), "t",
                   plan=ResamplePlan("bootstrap-with-replacement", B=5, m=500, seed=1))
    blob = json.loads(json.dumps(sweep_to_dict(res)))
    assert blob["B"] == 5
    assert len(blob["cells"]) == 2
    assert blob["axes"][0]["grid"] == [0.0, 1.0]

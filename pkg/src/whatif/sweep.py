"""Scenario families over grids: 1-D lift sweeps and 2-D trade-off grids.

Each grid point instantiates a constraint template at one target value,
runs the bootstrap, and records the estimate distribution. Iso-contours
over a 2-D grid's medians give the exchange rate between the two
constrained variables at a fixed metric level.
"""

from __future__ import annotations

import dataclasses
import warnings as _warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from whatif.dataset import Dataset, ResamplePlan
from whatif.diagnostics import BoxplotStats, boxplot_stats
from whatif.estimate import EstimateError, bootstrap_estimate
from whatif.maxent import SolverConfig
from whatif.scenario import ConstraintSpec, TargetSpec

DEFAULT_SWEEP_B = 50


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepAxis:
    """A constraint template plus the ordered target values to try.

    Grid values are interpreted per the template's target mode (e.g.
    lift-percent values for a lift sweep).
    """

    constraint_template: ConstraintSpec
    grid: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.grid) == 0:
            raise SweepError("grid must be non-empty")
        diffs = np.diff(self.grid)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise SweepError("grid must be strictly monotone")

    def instantiate(self, value: float) -> ConstraintSpec:
        t = self.constraint_template
        return dataclasses.replace(
            t, target=TargetSpec(t.target.mode, float(value))
        )


@dataclass
class SweepCell:
    a_value: float
    b_value: Optional[float]
    summary: Optional[dict[str, float]]
    infeasible_fraction: float
    boxplot: Optional[BoxplotStats]
    values: list[float] = field(default_factory=list)


@dataclass
class SweepResult:
    axes: tuple[SweepAxis, ...]
    cells: list[SweepCell]  # row-major: axis-a outer, axis-b inner
    B: int

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(len(ax.grid) for ax in self.axes)


def _run_cell(ds, scenario, metric, plan, cfg, a_value, b_value) -> SweepCell:
    try:
        dist = bootstrap_estimate(ds, scenario, metric, plan, cfg)
    except (EstimateError, ValueError):
        return SweepCell(
            a_value=a_value, b_value=b_value, summary=None,
            infeasible_fraction=1.0, boxplot=None,
        )
    return SweepCell(
        a_value=a_value,
        b_value=b_value,
        summary=dist.summary,
        infeasible_fraction=dist.infeasible_fraction,
        boxplot=boxplot_stats(dist.values, label=f"a={a_value:g}" + (f", b={b_value:g}" if b_value is not None else "")),
        values=dist.values,
    )


def sweep_1d(
    ds: Dataset,
    axis: SweepAxis,
    metric: str,
    base_scenario: Sequence[ConstraintSpec] = (),
    plan: Optional[ResamplePlan] = None,
    cfg: SolverConfig = SolverConfig(),
) -> SweepResult:
    """Bootstrap the scenario at each grid value of one constraint.

    Resample seeds are shared across cells so cell-to-cell differences
    reflect targets, not resampling noise.
    """
    plan = plan or ResamplePlan("bootstrap-with-replacement", B=DEFAULT_SWEEP_B,
                                m=ds.n_rows, seed=0)
    cells = []
    for v in axis.grid:
        scenario = list(base_scenario) + [axis.instantiate(v)]
        cells.append(_run_cell(ds, scenario, metric, plan, cfg, float(v), None))
    return SweepResult(axes=(axis,), cells=cells, B=plan.B)


def sweep_2d(
    ds: Dataset,
    axis_a: SweepAxis,
    axis_b: SweepAxis,
    metric: str,
    plan: Optional[ResamplePlan] = None,
    cfg: SolverConfig = SolverConfig(),
    base_scenario: Sequence[ConstraintSpec] = (),
) -> SweepResult:
    """Bootstrap over the Cartesian grid of two constraint templates."""
    plan = plan or ResamplePlan("bootstrap-with-replacement", B=DEFAULT_SWEEP_B,
                                m=ds.n_rows, seed=0)
    cells = []
    for va in axis_a.grid:
        for vb in axis_b.grid:
            scenario = list(base_scenario) + [axis_a.instantiate(va), axis_b.instantiate(vb)]
            cells.append(_run_cell(ds, scenario, metric, plan, cfg, float(va), float(vb)))
    return SweepResult(axes=(axis_a, axis_b), cells=cells, B=plan.B)


def exchange_rate(result: SweepResult, level: float) -> list[tuple[float, float]]:
    """Iso-contour of cell medians at ``level`` over a 2-D sweep.

    For each axis-a grid value, linearly interpolates along axis b to the
    b-target where the median crosses the level; rows with no crossing
    are omitted. Returns (a-target, b-target) points.
    """
    if len(result.axes) != 2:
        raise SweepError("exchange_rate needs a 2-D sweep result")
    n_a, n_b = result.grid_shape
    medians = np.full((n_a, n_b), np.nan)
    for idx, cell in enumerate(result.cells):
        i, j = divmod(idx, n_b)
        if cell.summary is not None:
            medians[i, j] = cell.summary["median"]

    finite = medians[np.isfinite(medians)]
    if finite.size == 0 or not (finite.min() <= level <= finite.max()):
        _warnings.warn(f"level {level:g} outside the range of cell medians; empty contour")
        return []

    b_grid = np.asarray(result.axes[1].grid, dtype=np.float64)
    points: list[tuple[float, float]] = []
    for i, a_val in enumerate(result.axes[0].grid):
        row = medians[i]
        for j in range(n_b - 1):
            y0, y1 = row[j], row[j + 1]
            if not (np.isfinite(y0) and np.isfinite(y1)):
                continue
            if (y0 - level) * (y1 - level) <= 0 and y0 != y1:
                frac = (level - y0) / (y1 - y0)
                points.append((float(a_val), float(b_grid[j] + frac * (b_grid[j + 1] - b_grid[j]))))
                break
        else:
            # exact hit on the last grid point
            if n_b >= 1 and np.isfinite(row[-1]) and row[-1] == level:
                points.append((float(a_val), float(b_grid[-1])))
    return points


def sweep_to_dict(result: SweepResult) -> dict:
    return {
        "axes": [
            {
                "feature": ax.constraint_template.feature,
                "statistic": ax.constraint_template.statistic,
                "relation": ax.constraint_template.relation,
                "mode": ax.constraint_template.target.mode,
                "grid": list(ax.grid),
            }
            for ax in result.axes
        ],
        "B": result.B,
        "cells": [
            {
                "a_value": c.a_value,
                "b_value": c.b_value,
                "summary": c.summary,
                "infeasible_fraction": c.infeasible_fraction,
                "boxplot": c.boxplot.to_dict() if c.boxplot else None,
                "values": c.values,
            }
            for c in result.cells
        ],
    }

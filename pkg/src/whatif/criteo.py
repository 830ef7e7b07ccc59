"""Criteo uplift dataset adapter and experiment reproduction harness.

The adapter expects the public incrementality-test table: twelve numeric
features f0..f11, a 0/1 treatment indicator, and binary visit/conversion
labels. The harness fits a scenario on the control branch targeting the
treatment branch's feature averages and compares the predicted visit
rate against plain bootstraps of both branches and a propensity-matching
baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from whatif.dataset import ColumnSpec, DataError, Dataset, ResamplePlan, load_csv, resample
from whatif.estimate import BootstrapDistribution, bootstrap_estimate, summarize
from whatif.matching import fit_propensity, greedy_match
from whatif.maxent import SolverConfig
from whatif.scenario import ConstraintSpec, TargetSpec

CRITEO_FEATURES = tuple(f"f{i}" for i in range(12))
DEFAULT_SCENARIO_FEATURES = ("f1", "f4", "f7", "f10")
DEFAULT_TARGETS = (17.00, 3.59, -5.43, 23.34)
DEFAULT_MATCH_SUBSAMPLE = 200_000


def criteo_schema() -> list[ColumnSpec]:
    cols = [ColumnSpec(name, "numeric-feature") for name in CRITEO_FEATURES]
    cols.append(ColumnSpec("treatment", "indicator-feature"))
    cols.append(ColumnSpec("visit", "metric"))
    cols.append(ColumnSpec("conversion", "metric"))
    return cols


def load_criteo(path: str | Path) -> Dataset:
    return load_csv(path, criteo_schema())


def split_branches(ds: Dataset) -> tuple[Dataset, Dataset]:
    """(control, treatment) split on the treatment indicator."""
    treated = ds.column("treatment") == 1.0
    if not treated.any() or treated.all():
        raise DataError("one experiment branch is empty")
    return ds.take(np.flatnonzero(~treated)), ds.take(np.flatnonzero(treated))


@dataclass(frozen=True)
class RunManifest:
    data_path: str
    out_dir: str
    metric: str = "visit"
    scenario_features: tuple[str, ...] = DEFAULT_SCENARIO_FEATURES
    targets: Optional[tuple[float, ...]] = DEFAULT_TARGETS  # None: use treatment means
    B: int = 199
    m: int = 10_000
    seed: int = 0
    match_subsample: int = DEFAULT_MATCH_SUBSAMPLE
    match_B: int = 50
    caliper: Optional[float] = None


@dataclass
class CriteoReport:
    control: BootstrapDistribution
    treatment: BootstrapDistribution
    scenario: BootstrapDistribution
    matching: BootstrapDistribution
    targets: tuple[float, ...]
    n_control: int
    n_treatment: int
    seed: int
    prediction_below_control: bool = field(init=False)
    prediction_above_treatment: bool = field(init=False)

    def __post_init__(self) -> None:
        self.prediction_below_control = (
            self.scenario.summary["mean"] < self.control.summary["mean"]
        )
        self.prediction_above_treatment = (
            self.scenario.summary["mean"] > self.treatment.summary["mean"]
        )

    def to_dict(self) -> dict:
        from whatif.estimate import distribution_to_dict

        return {
            "control": distribution_to_dict(self.control),
            "treatment": distribution_to_dict(self.treatment),
            "scenario": distribution_to_dict(self.scenario),
            "matching": distribution_to_dict(self.matching),
            "targets": list(self.targets),
            "n_control": self.n_control,
            "n_treatment": self.n_treatment,
            "seed": self.seed,
            "direction_flags": {
                "prediction_below_control": self.prediction_below_control,
                "prediction_above_treatment": self.prediction_above_treatment,
            },
        }


def _matching_distribution(
    control: Dataset,
    treatment: Dataset,
    features: Sequence[str],
    metric: str,
    m: int,
    B: int,
    seed: int,
    caliper: Optional[float],
) -> BootstrapDistribution:
    """Bootstrap the matched estimate over paired branch resamples.

    The control pool is drawn ten times larger than the treatment sample
    (capped by the pool size): 1:1 matching without replacement needs a
    control surplus, or it exhausts the pool and degenerates to the plain
    control mean.
    """
    m_t = min(m, treatment.n_rows)
    m_c = min(10 * m_t, control.n_rows)
    plan_c = ResamplePlan("bootstrap-with-replacement", B=B, m=m_c, seed=seed + 1)
    plan_t = ResamplePlan("bootstrap-with-replacement", B=B, m=m_t, seed=seed + 2)
    values = []
    failed = 0
    for index in range(B):
        c = resample(control, plan_c, index)
        t = resample(treatment, plan_t, index)
        model = fit_propensity(c, t, features)
        result = greedy_match(model, c, t, metric=metric, caliper=caliper)
        if result.pairs and math.isfinite(result.estimate):
            values.append(result.estimate)
        else:
            failed += 1
    summary, histogram = summarize(values)
    return BootstrapDistribution(
        metric=metric,
        values=values,
        B_requested=B,
        infeasible_fraction=failed / B,
        summary=summary,
        histogram=histogram,
    )


def criteo_repro(ds: Dataset, manifest: RunManifest) -> CriteoReport:
    """Run the full reproduction protocol on a Criteo-format dataset.

    Control and treatment visit rates are bootstrapped directly; the
    scenario pins the control's weighted feature means at the manifest
    targets (or the treatment branch's own means when targets is None)
    and is bootstrapped on control resamples; matching runs on seeded
    branch subsamples.
    """
    for col in (*manifest.scenario_features, manifest.metric):
        ds.column(col)
    control, treatment = split_branches(ds)

    targets = manifest.targets
    if targets is None:
        targets = tuple(
            float(treatment.column(f).mean()) for f in manifest.scenario_features
        )

    plan_c = ResamplePlan("bootstrap-with-replacement", B=manifest.B,
                          m=min(manifest.m, control.n_rows), seed=manifest.seed)
    plan_t = ResamplePlan("bootstrap-with-replacement", B=manifest.B,
                          m=min(manifest.m, treatment.n_rows), seed=manifest.seed)

    control_dist = bootstrap_estimate(control, [], manifest.metric, plan_c)
    treatment_dist = bootstrap_estimate(treatment, [], manifest.metric, plan_t)

    scenario = [
        ConstraintSpec(feature=f, statistic="weighted-mean", relation="eq",
                       target=TargetSpec("absolute", v))
        for f, v in zip(manifest.scenario_features, targets)
    ]
    scenario_dist = bootstrap_estimate(control, scenario, manifest.metric, plan_c)

    # matching runs on seeded subsamples: greedy matching is sequential and
    # the full branches are desk-scale prohibitive
    rng = np.random.default_rng([manifest.seed, 97])
    sub_c = control
    sub_t = treatment
    if control.n_rows > manifest.match_subsample:
        sub_c = control.take(rng.choice(control.n_rows, manifest.match_subsample, replace=False))
    if treatment.n_rows > manifest.match_subsample:
        sub_t = treatment.take(rng.choice(treatment.n_rows, manifest.match_subsample, replace=False))
    match_features = [f for f in CRITEO_FEATURES if f in {c.name for c in ds.columns}]
    matching_dist = _matching_distribution(
        sub_c, sub_t, match_features, manifest.metric,
        m=manifest.m, B=manifest.match_B, seed=manifest.seed, caliper=manifest.caliper,
    )

    return CriteoReport(
        control=control_dist,
        treatment=treatment_dist,
        scenario=scenario_dist,
        matching=matching_dist,
        targets=tuple(targets),
        n_control=control.n_rows,
        n_treatment=treatment.n_rows,
        seed=manifest.seed,
    )


def generate_criteo_shaped(
    n: int, seed: int, tilt_scale: float = 0.3
) -> Dataset:
    """Synthetic Criteo-shaped fixture: planted tilt on f1, f4, f7, f10.

    Control rows come from a Gaussian base; treatment rows from its
    exponential tilt on the four scenario features. Visits are Bernoulli
    in the tilted features, so the treatment visit rate genuinely shifts.
    """
    from whatif.dataset import DEFAULT_MIXTURE, PlantedTiltSpec, generate_planted_tilt

    tilted = {"f1": tilt_scale, "f4": tilt_scale, "f7": -tilt_scale, "f10": tilt_scale}
    rng = np.random.default_rng([seed])
    values: dict[str, np.ndarray] = {}
    half = n // 2
    tilt_vec = [tilted.get(f, 0.0) for f in CRITEO_FEATURES]
    spec = PlantedTiltSpec(n=half, n_features=12, tilt=tuple(tilt_vec), seed=seed)
    control, treatment, _ = generate_planted_tilt(spec)
    for i, f in enumerate(CRITEO_FEATURES):
        values[f] = np.concatenate([control.column(f"x{i}"), treatment.column(f"x{i}")])
    values["treatment"] = np.concatenate([np.zeros(half), np.ones(half)])
    score = sum(values[f] * tilted.get(f, 0.0) for f in CRITEO_FEATURES)
    p_visit = 1.0 / (1.0 + np.exp(-(score - 2.0)))
    values["visit"] = (rng.random(2 * half) < p_visit).astype(np.float64)
    values["conversion"] = (rng.random(2 * half) < 0.1 * p_visit).astype(np.float64)
    return Dataset(criteo_schema(), values)

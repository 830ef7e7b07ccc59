"""Tabular observation data: loading, typing, resampling, synthetic generation.

A :class:`Dataset` is an immutable table of N observations. Columns are
typed as numeric features, 0/1 indicator features, or metrics; constraint
compilation and estimation operate on these typed columns.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

COLUMN_KINDS = ("numeric-feature", "indicator-feature", "metric")


class DataError(ValueError):
    """Malformed input data, schema mismatch, or invalid data request."""


@dataclass(frozen=True)
class ColumnSpec:
    """Declared name and kind of one dataset column."""

    name: str
    kind: str
    units: str = ""

    def __post_init__(self) -> None:
        if self.kind not in COLUMN_KINDS:
            raise DataError(
                f"column {self.name!r}: unknown kind {self.kind!r}; "
                f"expected one of {COLUMN_KINDS}"
            )

    @property
    def is_feature(self) -> bool:
        return self.kind in ("numeric-feature", "indicator-feature")

    @property
    def is_indicator(self) -> bool:
        return self.kind == "indicator-feature"


class Dataset:
    """Immutable table of N observations with typed columns.

    Column values are float64 arrays marked read-only; a Dataset is safe
    to share across concurrent readers.
    """

    def __init__(self, columns: Sequence[ColumnSpec], values: Mapping[str, np.ndarray]):
        columns = tuple(columns)
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")
        if set(values) != set(names):
            raise DataError("values do not match schema columns")
        if not any(c.kind == "metric" for c in columns):
            raise DataError("dataset needs at least one metric column")

        arrays: dict[str, np.ndarray] = {}
        n_rows = None
        for spec in columns:
            arr = np.asarray(values[spec.name], dtype=np.float64)
            if arr.ndim != 1:
                raise DataError(f"column {spec.name!r} must be one-dimensional")
            if n_rows is None:
                n_rows = arr.shape[0]
            elif arr.shape[0] != n_rows:
                raise DataError(f"column {spec.name!r} has {arr.shape[0]} entries, expected {n_rows}")
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise DataError(f"non-finite value in column {spec.name!r}, row {bad + 1}")
            if spec.is_indicator and not np.all((arr == 0.0) | (arr == 1.0)):
                bad = int(np.flatnonzero((arr != 0.0) & (arr != 1.0))[0])
                raise DataError(
                    f"indicator column {spec.name!r} has value {arr[bad]!r} "
                    f"outside {{0, 1}} at row {bad + 1}"
                )
            arr = arr.copy()
            arr.flags.writeable = False
            arrays[spec.name] = arr
        if n_rows is None or n_rows < 1:
            raise DataError("no rows")

        self._columns = columns
        self._values = arrays
        self._n_rows = int(n_rows)

    @property
    def columns(self) -> tuple[ColumnSpec, ...]:
        return self._columns

    @property
    def n_rows(self) -> int:
        return self._n_rows

    @property
    def n_features(self) -> int:
        return sum(1 for c in self._columns if c.is_feature)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self._columns if c.is_feature]

    @property
    def metric_names(self) -> list[str]:
        return [c.name for c in self._columns if c.kind == "metric"]

    def spec(self, name: str) -> ColumnSpec:
        for c in self._columns:
            if c.name == name:
                return c
        raise DataError(f"unknown column {name!r}")

    def column(self, name: str) -> np.ndarray:
        try:
            return self._values[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    def take(self, indices: np.ndarray) -> "Dataset":
        """New Dataset holding the given source rows (repeats allowed)."""
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self._columns, {n: v[indices] for n, v in self._values.items()})

    def filter_indicator(self, name: str, value: float = 1.0) -> "Dataset":
        spec = self.spec(name)
        if not spec.is_indicator:
            raise DataError(f"column {name!r} is not an indicator")
        return self.take(np.flatnonzero(self.column(name) == value))

    def digest(self) -> str:
        """SHA-256 over column names and raw values; identifies the data."""
        h = hashlib.sha256()
        for spec in self._columns:
            h.update(spec.name.encode())
            h.update(spec.kind.encode())
            h.update(self._values[spec.name].tobytes())
        return h.hexdigest()

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({c.name: self._values[c.name] for c in self._columns})


@dataclass(frozen=True)
class ResamplePlan:
    """How to draw resamples: bootstrap with replacement or disjoint subsets."""

    mode: str  # "bootstrap-with-replacement" | "disjoint-subsets"
    B: int
    m: int = 0  # resample size, bootstrap mode only
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("bootstrap-with-replacement", "disjoint-subsets"):
            raise DataError(f"unknown resample mode {self.mode!r}")
        if self.B < 1:
            raise DataError("B must be >= 1")
        if self.mode == "bootstrap-with-replacement" and self.m < 1:
            raise DataError("bootstrap mode requires m >= 1")


def load_schema(path: str | Path) -> list[ColumnSpec]:
    """Read a JSON schema sidecar ({"columns": [{"name", "kind", "units"?}]})."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"schema file not found: {p}")
    doc = json.loads(p.read_text())
    cols = doc.get("columns")
    if not isinstance(cols, list) or not cols:
        raise DataError("schema must contain a non-empty 'columns' list")
    return [ColumnSpec(c["name"], c["kind"], c.get("units", "")) for c in cols]


def load_csv(path: str | Path, schema: Sequence[ColumnSpec]) -> Dataset:
    """Load a CSV with header row into a typed Dataset.

    The header must match the schema names in order. Cells must parse per
    column kind; indicator cells must be 0 or 1. Missing values are
    rejected.
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    names = [c.name for c in schema]
    try:
        df = pd.read_csv(p)
    except pd.errors.EmptyDataError:
        raise DataError("no rows") from None
    if list(df.columns) != names:
        raise DataError(f"header mismatch: file has {list(df.columns)}, schema expects {names}")
    if len(df) == 0:
        raise DataError("no rows")

    values: dict[str, np.ndarray] = {}
    for spec in schema:
        col = df[spec.name]
        arr = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(arr)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"cannot parse cell {col.iloc[row]!r} in column {spec.name!r}, row {row + 1}"
            )
        if spec.is_indicator and not np.all((arr == 0.0) | (arr == 1.0)):
            row = int(np.flatnonzero((arr != 0.0) & (arr != 1.0))[0])
            raise DataError(
                f"indicator column {spec.name!r} has value {arr[row]} at row {row + 1}"
            )
        values[spec.name] = arr
    return Dataset(schema, values)


def resample(ds: Dataset, plan: ResamplePlan, index: int) -> Dataset:
    """Return the index-th resample of ``ds`` under ``plan``.

    Deterministic given (plan.seed, index); bootstrap resamples use
    independent streams so they can run in parallel.
    """
    if not 0 <= index < plan.B:
        raise DataError(f"resample index {index} outside [0, {plan.B})")
    if plan.mode == "bootstrap-with-replacement":
        rng = np.random.default_rng([plan.seed, index])
        idx = rng.integers(0, ds.n_rows, size=plan.m)
        return ds.take(idx)
    # disjoint subsets: one seed-shuffled order, split into B near-equal parts
    rng = np.random.default_rng([plan.seed])
    perm = rng.permutation(ds.n_rows)
    parts = np.array_split(perm, plan.B)
    if len(parts[index]) == 0:
        raise DataError(f"disjoint part {index} is empty (B={plan.B} > N={ds.n_rows})")
    return ds.take(parts[index])


def column_means(
    ds: Dataset, columns: Sequence[str], condition: Optional[str] = None
) -> dict[str, float]:
    """Unweighted means, optionally restricted to rows where an indicator is 1."""
    mask = None
    if condition is not None:
        spec = ds.spec(condition)
        if not spec.is_indicator:
            raise DataError(f"condition column {condition!r} is not an indicator")
        mask = ds.column(condition) == 1.0
        if not mask.any():
            raise DataError(f"condition column {condition!r} selects no rows")
    out: dict[str, float] = {}
    for name in columns:
        arr = ds.column(name)
        out[name] = float(arr[mask].mean() if mask is not None else arr.mean())
    return out


# ---------------------------------------------------------------------------
# Synthetic planted-tilt data with analytic ground truth.
#
# Features are independent draws from a fixed per-dimension Gaussian
# mixture. The treatment population reweights the base density
# proportionally to exp(tilt . x); for Gaussian mixtures this tilt has a
# closed form (component k gets weight pi_k * exp(t*m_k + t^2 s_k^2 / 2)
# and mean m_k + t s_k^2), so treatment rows are sampled exactly and the
# tilted means are known analytically.
# ---------------------------------------------------------------------------

DEFAULT_MIXTURE = ((0.6, 0.0, 1.0), (0.4, 1.5, 0.8))  # (weight, mean, sd)


class TiltTooExtremeError(DataError):
    """The requested tilt leaves too little overlap with the base density."""


@dataclass(frozen=True)
class PlantedTiltSpec:
    """Recipe for a synthetic control/treatment pair with known truth."""

    n: int
    n_features: int
    tilt: tuple[float, ...]
    seed: int
    noise_sd: float = 1.0
    components: tuple[tuple[float, float, float], ...] = DEFAULT_MIXTURE

    def __post_init__(self) -> None:
        if self.n < 100:
            raise DataError("planted-tilt spec requires n >= 100")
        if len(self.tilt) != self.n_features:
            raise DataError("tilt length must equal n_features")
        if not all(math.isfinite(t) for t in self.tilt):
            raise DataError("tilt must be finite")
        total = sum(w for w, _, _ in self.components)
        if abs(total - 1.0) > 1e-12:
            raise DataError("mixture weights must sum to one")


def _tilted_components(components, lam: float):
    """Tilt each Gaussian component by exp(lam * x); returns (w, mean, sd) lists."""
    logw = []
    means = []
    sds = []
    for w, m, s in components:
        logw.append(math.log(w) + lam * m + 0.5 * lam * lam * s * s)
        means.append(m + lam * s * s)
        sds.append(s)
    mx = max(logw)
    ws = [math.exp(v - mx) for v in logw]
    tot = sum(ws)
    return [w / tot for w in ws], means, sds


def tilted_feature_mean(lam: float, components=DEFAULT_MIXTURE) -> float:
    """Exact mean of one feature under the exp(lam*x)-tilted mixture."""
    ws, means, _ = _tilted_components(components, lam)
    return float(sum(w * m for w, m in zip(ws, means)))


def _logsumexp(values: list[float]) -> float:
    mx = max(values)
    return mx + math.log(sum(math.exp(v - mx) for v in values))


def _overlap_ratio(lam: float, components) -> float:
    """(E w)^2 / E w^2 for w = exp(lam*x) under the base mixture (one dim)."""
    # log-space to survive extreme tilts, which must report a tiny ratio
    l1 = [math.log(w) + lam * m + 0.5 * lam * lam * s * s for w, m, s in components]
    l2 = [math.log(w) + 2 * lam * m + 2 * lam * lam * s * s for w, m, s in components]
    log_e1 = _logsumexp(l1)
    log_e2 = _logsumexp(l2)
    return math.exp(min(2 * log_e1 - log_e2, 0.0))


def _sample_mixture(rng: np.random.Generator, n: int, weights, means, sds) -> np.ndarray:
    comp = rng.choice(len(weights), size=n, p=np.asarray(weights))
    x = rng.standard_normal(n)
    return np.asarray(means)[comp] + np.asarray(sds)[comp] * x


def generate_planted_tilt(spec: PlantedTiltSpec) -> tuple[Dataset, Dataset, dict[str, float]]:
    """Generate (control, treatment, truth) with a planted exponential tilt.

    The metric column ``outcome`` is the sum of all features plus
    independent Gaussian noise, so its tilted mean is the sum of the
    tilted feature means. ``truth`` maps each feature and the metric to
    its exact tilted mean.
    """
    overlap = 1.0
    for lam in spec.tilt:
        overlap *= _overlap_ratio(lam, spec.components)
    if overlap < 1e-4:
        raise TiltTooExtremeError(
            f"tilt {spec.tilt} leaves overlap ratio {overlap:.2e} < 1e-4"
        )

    rng = np.random.default_rng([spec.seed])
    base_w = [w for w, _, _ in spec.components]
    base_m = [m for _, m, _ in spec.components]
    base_s = [s for _, _, s in spec.components]

    names = [f"x{j}" for j in range(spec.n_features)]
    control_vals: dict[str, np.ndarray] = {}
    treat_vals: dict[str, np.ndarray] = {}
    truth: dict[str, float] = {}
    for j, lam in enumerate(spec.tilt):
        control_vals[names[j]] = _sample_mixture(rng, spec.n, base_w, base_m, base_s)
        tw, tm, ts = _tilted_components(spec.components, lam)
        treat_vals[names[j]] = _sample_mixture(rng, spec.n, tw, tm, ts)
        truth[names[j]] = tilted_feature_mean(lam, spec.components)

    control_vals["outcome"] = sum(control_vals[n] for n in names) + spec.noise_sd * rng.standard_normal(spec.n)
    treat_vals["outcome"] = sum(treat_vals[n] for n in names) + spec.noise_sd * rng.standard_normal(spec.n)
    truth["outcome"] = float(sum(truth[n] for n in names))

    columns = [ColumnSpec(n, "numeric-feature") for n in names] + [ColumnSpec("outcome", "metric")]
    return Dataset(columns, control_vals), Dataset(columns, treat_vals), truth

"""HTTP JSON service exposing the scenario-analysis pipeline.

Datasets are registered by server-side path (no uploads); all
computation is synchronous and seeded, and every response echoes the
seed used so clients can replay runs exactly.
"""

from __future__ import annotations

import json
import secrets
import threading
from pathlib import Path
from typing import Any, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from whatif.dataset import ColumnSpec, DataError, Dataset, ResamplePlan, column_means, load_csv, load_schema
from whatif.diagnostics import diagnose
from whatif.estimate import EstimateError, bootstrap_estimate, distribution_to_dict, point_estimate
from whatif.matching import MatchingError, fit_propensity, greedy_match
from whatif.maxent import SolverConfig, solve
from whatif.scenario import (
    InfeasibleConstraintError,
    ScenarioError,
    compile_constraints,
    parse_scenario,
)
from whatif.sweep import SweepAxis, exchange_rate, sweep_1d, sweep_2d, sweep_to_dict
from whatif.cli import _parse_axis, CliError

MAX_SOLVE_ROWS = 2_000_000
MAX_SWEEP_SOLVES = 50_000


class RegisterRequest(BaseModel):
    path: str
    schema_: Any = Field(alias="schema")  # path string or inline {"columns": [...]}

    model_config = {"populate_by_name": True}


class ScenarioRequest(BaseModel):
    scenario: dict


class SolveRequest(BaseModel):
    dataset_id: str
    scenario: dict
    metrics: Optional[list[str]] = None
    seed: Optional[int] = None
    threshold: float = 10.0


class BootstrapRequest(BaseModel):
    dataset_id: str
    scenario: dict
    metrics: Optional[list[str]] = None
    B: int = 199
    m: Optional[int] = None
    seed: Optional[int] = None


class SweepRequest(BaseModel):
    dataset_id: str
    scenario: Optional[dict] = None
    axes: list[dict]
    metric: Optional[str] = None
    B: int = 50
    m: Optional[int] = None
    seed: Optional[int] = None
    level: Optional[float] = None


class MatchRequest(BaseModel):
    control_id: str
    treatment_id: str
    features: Optional[list[str]] = None
    metric: Optional[str] = None
    caliper: Optional[float] = None


class _Registry:
    """Dataset registry; registration is atomic, reads are lock-free."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._datasets: dict[str, Dataset] = {}

    def register(self, ds: Dataset) -> str:
        with self._lock:
            ds_id = f"ds-{len(self._datasets)}-{ds.digest()[:12]}"
            self._datasets[ds_id] = ds
            return ds_id

    def get(self, ds_id: str) -> Dataset:
        ds = self._datasets.get(ds_id)
        if ds is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {ds_id!r}")
        return ds


def _parse_request_scenario(doc: dict):
    try:
        return parse_scenario(json.dumps(doc))
    except ScenarioError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _infeasible_422(exc_or_report) -> HTTPException:
    if isinstance(exc_or_report, InfeasibleConstraintError):
        detail = {
            "offending_labels": list(exc_or_report.offending_labels),
            "evidence": exc_or_report.evidence,
            "dual_norm_at_stop": 0.0,
            "message": str(exc_or_report),
        }
    else:
        detail = {
            "offending_labels": list(exc_or_report.offending_labels),
            "evidence": exc_or_report.evidence,
            "dual_norm_at_stop": exc_or_report.dual_norm_at_stop,
            "message": "constraints cannot be met jointly",
        }
    return HTTPException(status_code=422, detail=detail)


def _seed_or_new(seed: Optional[int]) -> int:
    return seed if seed is not None else secrets.randbelow(2**31)


def create_app(dataset_dir: str = ".") -> FastAPI:
    app = FastAPI(title="whatif", version="0.1.0")
    registry = _Registry()
    base_dir = Path(dataset_dir).resolve()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/datasets")
    def register_dataset(req: RegisterRequest) -> dict:
        path = (base_dir / req.path).resolve() if not Path(req.path).is_absolute() else Path(req.path)
        try:
            if isinstance(req.schema_, str):
                schema_path = (base_dir / req.schema_) if not Path(req.schema_).is_absolute() else Path(req.schema_)
                schema = load_schema(schema_path)
            else:
                schema = [
                    ColumnSpec(c["name"], c["kind"], c.get("units", ""))
                    for c in req.schema_["columns"]
                ]
            ds = load_csv(path, schema)
        except (DataError, KeyError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"bad dataset/schema: {exc}") from exc
        if ds.n_rows > MAX_SOLVE_ROWS:
            raise HTTPException(status_code=413, detail=f"dataset exceeds {MAX_SOLVE_ROWS} rows")
        return {"id": registry.register(ds), "n_rows": ds.n_rows, "n_features": ds.n_features}

    @app.get("/datasets/{ds_id}/summary")
    def dataset_summary(ds_id: str) -> dict:
        ds = registry.get(ds_id)
        return {
            "id": ds_id,
            "n_rows": ds.n_rows,
            "n_features": ds.n_features,
            "columns": [{"name": c.name, "kind": c.kind, "units": c.units} for c in ds.columns],
            "means": column_means(ds, [c.name for c in ds.columns]),
            "digest": ds.digest(),
        }

    @app.post("/scenarios/validate")
    def validate_scenario(req: ScenarioRequest) -> dict:
        specs = _parse_request_scenario(req.scenario)
        return {"valid": True, "constraints": [s.display_label() for s in specs]}

    @app.post("/solve")
    def solve_endpoint(req: SolveRequest) -> dict:
        ds = registry.get(req.dataset_id)
        specs = _parse_request_scenario(req.scenario)
        seed = _seed_or_new(req.seed)
        try:
            cons = compile_constraints(specs, ds)
        except InfeasibleConstraintError as exc:
            raise _infeasible_422(exc)
        except ScenarioError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        result = solve(cons, SolverConfig())
        if result.status == "infeasible":
            raise _infeasible_422(result.infeasibility)
        metrics = req.metrics or ds.metric_names
        diag = diagnose(result, threshold=req.threshold)
        return {
            "seed": seed,
            "status": result.status,
            "estimates": {m: point_estimate(result.weights, ds, m).value for m in metrics},
            "entropy": result.entropy,
            "constraints": list(cons.labels),
            "residuals": result.residuals.tolist(),
            "relative_weights": (ds.n_rows * result.weights).tolist(),
            "diagnostics": diag.to_dict(),
        }

    @app.post("/bootstrap")
    def bootstrap_endpoint(req: BootstrapRequest) -> dict:
        ds = registry.get(req.dataset_id)
        specs = _parse_request_scenario(req.scenario)
        seed = _seed_or_new(req.seed)
        if req.B > MAX_SWEEP_SOLVES:
            raise HTTPException(status_code=413, detail=f"B exceeds {MAX_SWEEP_SOLVES}")
        plan = ResamplePlan("bootstrap-with-replacement", B=req.B,
                            m=req.m or ds.n_rows, seed=seed)
        metrics = req.metrics or ds.metric_names
        out: dict = {"seed": seed, "B": req.B, "m": plan.m, "distributions": {}}
        for m in metrics:
            try:
                dist = bootstrap_estimate(ds, specs, m, plan)
            except InfeasibleConstraintError as exc:
                raise _infeasible_422(exc)
            except (EstimateError, ScenarioError) as exc:
                raise HTTPException(status_code=422, detail={
                    "offending_labels": [], "evidence": "dual-divergence",
                    "dual_norm_at_stop": 0.0, "message": str(exc),
                }) from exc
            out["distributions"][m] = distribution_to_dict(dist)
        return out

    @app.post("/sweep")
    def sweep_endpoint(req: SweepRequest) -> dict:
        ds = registry.get(req.dataset_id)
        base = _parse_request_scenario(req.scenario) if req.scenario else []
        seed = _seed_or_new(req.seed)
        if not 1 <= len(req.axes) <= 2:
            raise HTTPException(status_code=400, detail="sweep needs 1 or 2 axes")
        try:
            axes = [_parse_axis(json.dumps(a)) for a in req.axes]
        except CliError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        n_cells = int(np.prod([len(a.grid) for a in axes]))
        if n_cells * req.B > MAX_SWEEP_SOLVES:
            raise HTTPException(status_code=413,
                                detail=f"cells x B = {n_cells * req.B} exceeds {MAX_SWEEP_SOLVES}")
        plan = ResamplePlan("bootstrap-with-replacement", B=req.B,
                            m=req.m or ds.n_rows, seed=seed)
        metric = req.metric or ds.metric_names[0]
        if len(axes) == 2:
            result = sweep_2d(ds, axes[0], axes[1], metric, plan=plan, base_scenario=base)
        else:
            result = sweep_1d(ds, axes[0], metric, base_scenario=base, plan=plan)
        payload = sweep_to_dict(result)
        payload["seed"] = seed
        payload["metric"] = metric
        if req.level is not None and len(axes) == 2:
            payload["contour"] = {"level": req.level, "points": exchange_rate(result, req.level)}
        return payload

    @app.post("/match")
    def match_endpoint(req: MatchRequest) -> dict:
        control = registry.get(req.control_id)
        treatment = registry.get(req.treatment_id)
        features = req.features or control.feature_names
        metric = req.metric or control.metric_names[0]
        try:
            model = fit_propensity(control, treatment, features)
            result = greedy_match(model, control, treatment, metric=metric, caliper=req.caliper)
        except MatchingError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        import math

        return {
            # null, not NaN: the JSON encoder rejects non-finite floats
            "estimate": result.estimate if math.isfinite(result.estimate) else None,
            "n_pairs": len(result.pairs),
            "unmatched_treatment": result.unmatched_treatment,
            "caliper": result.caliper,
            "propensity_converged": model.converged,
            "coefficients": dict(zip(model.feature_names, model.coefficients.tolist())),
        }

    return app

"""Command-line interface for the scenario-analysis pipeline.

Exit codes: 0 success, 2 usage error, 3 infeasible scenario, 4 data
error. Every artifact written embeds the input digests (dataset hash,
scenario hash, seed) so runs are attributable and replayable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from whatif import criteo as criteo_mod
from whatif.dataset import (
    DataError,
    Dataset,
    PlantedTiltSpec,
    ResamplePlan,
    generate_planted_tilt,
    load_csv,
    load_schema,
)
from whatif.diagnostics import diagnose
from whatif.estimate import EstimateError, bootstrap_estimate, distribution_to_dict, point_estimate
from whatif.maxent import SolverConfig, infeasible_result, solve
from whatif.scenario import (
    ConstraintSpec,
    InfeasibleConstraintError,
    ScenarioError,
    TargetSpec,
    compile_constraints,
    parse_scenario,
)
from whatif.sweep import SweepAxis, exchange_rate, sweep_1d, sweep_2d, sweep_to_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_DATA = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_data(args) -> Dataset:
    try:
        schema = load_schema(args.schema)
        return load_csv(args.data, schema)
    except DataError as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc


def _load_scenario(path: str) -> list[ConstraintSpec]:
    p = Path(path)
    if not p.exists():
        raise CliError(f"data error: scenario file not found: {p}", EXIT_DATA)
    try:
        return parse_scenario(p.read_text())
    except ScenarioError as exc:
        raise CliError(f"usage error: {exc}", EXIT_USAGE) from exc


def _provenance(args, extra: Optional[dict] = None) -> dict:
    prov: dict = {}
    if getattr(args, "data", None):
        prov["dataset_sha256"] = _sha256_file(args.data)
    if getattr(args, "scenario", None):
        prov["scenario_sha256"] = _sha256_file(args.scenario)
    if getattr(args, "seed", None) is not None:
        prov["seed"] = args.seed
    if extra:
        prov.update(extra)
    return prov


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _solve_or_raise(specs, ds, cfg):
    try:
        cons = compile_constraints(specs, ds)
    except InfeasibleConstraintError as exc:
        result = infeasible_result(ds.n_rows, exc)
        raise CliError(
            f"infeasible scenario: {exc} "
            f"(evidence: {result.infeasibility.evidence})",
            EXIT_INFEASIBLE,
        ) from exc
    except ScenarioError as exc:
        raise CliError(f"usage error: {exc}", EXIT_USAGE) from exc
    result = solve(cons, cfg)
    if result.status == "infeasible":
        rep = result.infeasibility
        raise CliError(
            "infeasible scenario: constraints "
            f"{list(rep.offending_labels)} cannot be met jointly "
            f"(evidence: {rep.evidence})",
            EXIT_INFEASIBLE,
        )
    if result.status != "converged":
        raise CliError("solver did not converge (max-iters)", EXIT_INFEASIBLE)
    return cons, result


def cmd_validate(args) -> int:
    specs = _load_scenario(args.scenario)
    if args.data:
        ds = _load_data(args)
        try:
            compile_constraints(specs, ds)
        except InfeasibleConstraintError as exc:
            raise CliError(f"infeasible scenario: {exc}", EXIT_INFEASIBLE) from exc
        except ScenarioError as exc:
            raise CliError(f"usage error: {exc}", EXIT_USAGE) from exc
    print(f"scenario valid: {len(specs)} constraint(s)")
    return EXIT_OK


def cmd_solve(args) -> int:
    ds = _load_data(args)
    specs = _load_scenario(args.scenario)
    cfg = SolverConfig()
    cons, result = _solve_or_raise(specs, ds, cfg)
    metrics = args.metric or ds.metric_names
    estimates = {m: point_estimate(result.weights, ds, m).value for m in metrics}
    for m in metrics:
        print(f"{m}: {estimates[m]:.6g}")

    out = _out_dir(args)
    rel = ds.n_rows * result.weights
    with open(out / "weights.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "weight", "relative_weight"])
        for i, (w, r) in enumerate(zip(result.weights, rel)):
            writer.writerow([i, repr(float(w)), repr(float(r))])
    diag = diagnose(result, threshold=args.threshold)
    _write_json(out / "result.json", {
        "estimates": estimates,
        "entropy": result.entropy,
        "status": result.status,
        "iterations": result.iterations,
        "constraints": list(cons.labels),
        "residuals": result.residuals.tolist(),
        "diagnostics": diag.to_dict(),
        "provenance": _provenance(args),
    })
    return EXIT_OK


def cmd_estimate(args) -> int:
    ds = _load_data(args)
    specs = _load_scenario(args.scenario)
    plan = ResamplePlan("bootstrap-with-replacement", B=args.B, m=args.m or ds.n_rows,
                        seed=args.seed)
    metrics = args.metric or ds.metric_names
    out = _out_dir(args)
    payload: dict = {"provenance": _provenance(args, {"B": plan.B, "m": plan.m})}
    for m in metrics:
        try:
            dist = bootstrap_estimate(ds, specs, m, plan)
        except InfeasibleConstraintError as exc:
            raise CliError(f"infeasible scenario: {exc}", EXIT_INFEASIBLE) from exc
        except EstimateError as exc:
            raise CliError(f"infeasible scenario: {exc}", EXIT_INFEASIBLE) from exc
        payload[m] = {k: v for k, v in distribution_to_dict(dist).items() if k != "values"}
        with open(out / f"values_{m}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["value"])
            for v in dist.values:
                writer.writerow([repr(float(v))])
        print(f"{m}: mean {dist.summary['mean']:.6g} "
              f"[q05 {dist.summary['q05']:.6g}, q95 {dist.summary['q95']:.6g}] "
              f"infeasible {dist.infeasible_fraction:.1%}")
    _write_json(out / "estimate.json", payload)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    ds = _load_data(args)
    specs = _load_scenario(args.scenario)
    _, result = _solve_or_raise(specs, ds, SolverConfig())
    diag = diagnose(result, threshold=args.threshold)
    out = _out_dir(args)
    _write_json(out / "diagnostics.json", {
        "diagnostics": diag.to_dict(),
        "provenance": _provenance(args),
    })
    print(f"ess {diag.ess:.4g} (ratio {diag.ess_ratio:.3f}), "
          f"entropy ratio {diag.entropy_ratio:.3f}, outliers {diag.outlier_count}")
    for w in diag.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _parse_axis(text: str) -> SweepAxis:
    try:
        doc = json.loads(text)
        template = ConstraintSpec(
            feature=doc["feature"],
            statistic=doc.get("statistic", "weighted-mean"),
            relation=doc.get("relation", "eq"),
            target=TargetSpec(doc.get("mode", "multiple-of-baseline"), 0.0),
            condition=doc.get("condition"),
        )
        return SweepAxis(constraint_template=template, grid=tuple(doc["grid"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"usage error: bad axis spec {text!r}: {exc}", EXIT_USAGE) from exc


def cmd_sweep(args) -> int:
    ds = _load_data(args)
    base = _load_scenario(args.scenario) if args.scenario else []
    axis_a = _parse_axis(args.grid_a)
    plan = ResamplePlan("bootstrap-with-replacement", B=args.B, m=args.m or ds.n_rows,
                        seed=args.seed)
    metric = args.metric[0] if args.metric else ds.metric_names[0]
    if args.grid_b:
        axis_b = _parse_axis(args.grid_b)
        result = sweep_2d(ds, axis_a, axis_b, metric, plan=plan, base_scenario=base)
    else:
        result = sweep_1d(ds, axis_a, metric, base_scenario=base, plan=plan)
    out = _out_dir(args)
    payload = sweep_to_dict(result)
    payload["provenance"] = _provenance(args, {"B": plan.B, "m": plan.m})
    if args.level is not None and args.grid_b:
        payload["contour"] = {
            "level": args.level,
            "points": exchange_rate(result, args.level),
        }
    _write_json(out / "sweep.json", payload)
    with open(out / "sweep.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["a_value", "b_value", "median", "sd", "infeasible_fraction"])
        for c in result.cells:
            writer.writerow([
                c.a_value,
                "" if c.b_value is None else c.b_value,
                "" if c.summary is None else repr(c.summary["median"]),
                "" if c.summary is None else repr(c.summary["sd"]),
                c.infeasible_fraction,
            ])
    print(f"swept {len(result.cells)} cell(s), B={result.B}")
    return EXIT_OK


def cmd_match(args) -> int:
    from whatif.matching import fit_propensity, greedy_match

    try:
        schema = load_schema(args.schema)
        control = load_csv(args.data, schema)
        treatment = load_csv(args.treatment, schema)
    except DataError as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    features = args.features or control.feature_names
    metric = args.metric[0] if args.metric else control.metric_names[0]
    model = fit_propensity(control, treatment, features)
    result = greedy_match(model, control, treatment, metric=metric, caliper=args.caliper)
    out = _out_dir(args)
    with open(out / "pairs.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["treatment_row", "control_row"])
        for t, c in result.pairs:
            writer.writerow([t, c])
    _write_json(out / "match.json", {
        "estimate": result.estimate,
        "n_pairs": len(result.pairs),
        "unmatched_treatment": result.unmatched_treatment,
        "caliper": result.caliper,
        "propensity_converged": model.converged,
        "coefficients": dict(zip(model.feature_names, model.coefficients.tolist())),
        "provenance": _provenance(args, {"treatment_sha256": _sha256_file(args.treatment)}),
    })
    print(f"{metric} (matched): {result.estimate:.6g} over {len(result.pairs)} pair(s)")
    return EXIT_OK


def cmd_criteo_repro(args) -> int:
    try:
        ds = criteo_mod.load_criteo(args.data)
    except DataError as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    targets = None if args.targets == "auto" else (
        tuple(float(t) for t in args.targets.split(",")) if args.targets else criteo_mod.DEFAULT_TARGETS
    )
    manifest = criteo_mod.RunManifest(
        data_path=str(args.data),
        out_dir=str(args.out),
        targets=targets,
        B=args.B,
        m=args.m,
        seed=args.seed,
        match_subsample=args.match_subsample,
        caliper=args.caliper,
    )
    try:
        report = criteo_mod.criteo_repro(ds, manifest)
    except (EstimateError, InfeasibleConstraintError) as exc:
        raise CliError(f"infeasible scenario: {exc}", EXIT_INFEASIBLE) from exc
    out = _out_dir(args)
    payload = report.to_dict()
    payload["provenance"] = _provenance(args)
    _write_json(out / "criteo_report.json", payload)
    print(f"control mean {report.control.summary['mean']:.6g}, "
          f"treatment mean {report.treatment.summary['mean']:.6g}, "
          f"scenario mean {report.scenario.summary['mean']:.6g}, "
          f"matching mean {report.matching.summary['mean']:.6g}")
    print(f"prediction_below_control={report.prediction_below_control} "
          f"prediction_above_treatment={report.prediction_above_treatment}")
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    out = _out_dir(args)
    if args.criteo_shaped:
        ds = criteo_mod.generate_criteo_shaped(args.n, seed=args.seed)
        ds.to_dataframe().to_csv(out / "criteo_synth.csv", index=False)
        _write_json(out / "criteo_synth.schema.json", {
            "columns": [{"name": c.name, "kind": c.kind} for c in ds.columns]
        })
        print(f"wrote {out / 'criteo_synth.csv'} ({ds.n_rows} rows)")
        return EXIT_OK
    tilt = tuple(float(t) for t in args.tilt.split(",")) if args.tilt else (0.3,) * args.features
    spec = PlantedTiltSpec(n=args.n, n_features=args.features, tilt=tilt, seed=args.seed)
    try:
        control, treatment, truth = generate_planted_tilt(spec)
    except DataError as exc:
        raise CliError(f"data error: {exc}", EXIT_DATA) from exc
    control.to_dataframe().to_csv(out / "control.csv", index=False)
    treatment.to_dataframe().to_csv(out / "treatment.csv", index=False)
    _write_json(out / "schema.json", {
        "columns": [{"name": c.name, "kind": c.kind} for c in control.columns]
    })
    _write_json(out / "truth.json", {"truth": truth, "tilt": list(tilt), "seed": args.seed})
    print(f"wrote control/treatment ({args.n} rows each) and truth to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from whatif.server import create_app

    app = create_app(dataset_dir=args.dataset_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whatif",
        description="Scenario analysis: predict metric shifts by maximum-entropy reweighting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p, scenario_required=True):
        p.add_argument("--data", required=True, help="CSV data file")
        p.add_argument("--schema", required=True, help="JSON schema sidecar")
        p.add_argument("--scenario", required=scenario_required, help="scenario JSON file")
        p.add_argument("--metric", action="append", help="metric column (repeatable)")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("validate", help="check a scenario document")
    p.add_argument("--scenario", required=True)
    p.add_argument("--data")
    p.add_argument("--schema")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve on the full dataset and estimate metrics")
    add_data_flags(p)
    p.add_argument("--threshold", type=float, default=10.0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("estimate", help="bootstrap the scenario prediction")
    add_data_flags(p)
    p.add_argument("--B", type=int, default=199)
    p.add_argument("--m", type=int, default=0, help="resample size (default N)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="weight diagnostics for a solved scenario")
    add_data_flags(p)
    p.add_argument("--threshold", type=float, default=10.0)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", help="sweep constraint targets over a grid")
    add_data_flags(p, scenario_required=False)
    p.add_argument("--grid-a", required=True, help='axis JSON, e.g. {"feature":"x0","grid":[0.9,1,1.1]}')
    p.add_argument("--grid-b", help="second axis JSON (makes a 2-D grid)")
    p.add_argument("--level", type=float, help="iso-contour level for 2-D sweeps")
    p.add_argument("--B", type=int, default=50)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("match", help="propensity-match a treatment file against control")
    add_data_flags(p, scenario_required=False)
    p.add_argument("--treatment", required=True, help="treatment CSV (same schema)")
    p.add_argument("--features", nargs="*", help="propensity features (default: all features)")
    p.add_argument("--caliper", type=float)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("criteo-repro", help="reproduce the uplift-experiment validation")
    p.add_argument("--data", required=True, help="Criteo-format CSV")
    p.add_argument("--out", default="out")
    p.add_argument("--targets", help='comma list, or "auto" for treatment means')
    p.add_argument("--B", type=int, default=199)
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--match-subsample", type=int, default=criteo_mod.DEFAULT_MATCH_SUBSAMPLE)
    p.add_argument("--caliper", type=float)
    p.set_defaults(func=cmd_criteo_repro)

    p = sub.add_parser("gen-synth", help="generate planted-tilt synthetic data")
    p.add_argument("--out", default="out")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--features", type=int, default=3)
    p.add_argument("--tilt", help="comma list of per-feature tilts (default 0.3 each)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--criteo-shaped", action="store_true")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("serve", help="run the HTTP JSON service")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--dataset-dir", default=".")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ScenarioError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import numpy as np
import pytest

from whatif.criteo import (
    CRITEO_FEATURES,
    DEFAULT_SCENARIO_FEATURES,
    DEFAULT_TARGETS,
    RunManifest,
    criteo_repro,
    criteo_schema,
    generate_criteo_shaped,
    load_criteo,
    split_branches,
)
from whatif.dataset import DataError


class TestSchemaAndLoad:
    def test_schema_shape(self):
        cols = criteo_schema()
        names = [c.name for c in cols]
        assert names[:12] == list(CRITEO_FEATURES)
        assert "treatment" in names and "visit" in names and "conversion" in names
        kinds = {c.name: c.kind for c in cols}
        assert kinds["treatment"] == "indicator-feature"
        assert kinds["visit"] == "metric"

    def test_defaults_frozen(self):
        assert DEFAULT_SCENARIO_FEATURES == ("f1", "f4", "f7", "f10")
        assert DEFAULT_TARGETS == (17.00, 3.59, -5.43, 23.34)

    def test_load_round_trip(self, tmp_path):
        ds = generate_criteo_shaped(n=200, seed=1)
        header = ",".join(c.name for c in criteo_schema())
        rows = [header]
        cols = [ds.column(c.name) for c in criteo_schema()]
        for i in range(ds.n_rows):
            rows.append(",".join(repr(float(col[i])) for col in cols))
        p = tmp_path / "criteo.csv"
        p.write_text("\n".join(rows) + "\n")
        loaded = load_criteo(p)
        assert loaded.n_rows == 200
        assert np.allclose(loaded.column("f1"), ds.column("f1"))


class TestSplitBranches:
    def test_split_counts(self):
        ds = generate_criteo_shaped(n=400, seed=0)
        control, treatment = split_branches(ds)
        assert control.n_rows == 200 and treatment.n_rows == 200
        assert np.all(control.column("treatment") == 0)
        assert np.all(treatment.column("treatment") == 1)

    def test_single_branch_rejected(self):
        ds = generate_criteo_shaped(n=400, seed=0)
        control, _ = split_branches(ds)
        with pytest.raises(DataError, match="branch"):
            split_branches(control)


class TestGenerator:
    def test_deterministic(self):
        a = generate_criteo_shaped(n=300, seed=5)
        b = generate_criteo_shaped(n=300, seed=5)
        assert a.digest() == b.digest()

    def test_treatment_shifts_visit_rate(self):
        ds = generate_criteo_shaped(n=40_000, seed=2)
        control, treatment = split_branches(ds)
        assert treatment.column("visit").mean() > control.column("visit").mean()
        # tilted features move in the planted directions
        assert treatment.column("f1").mean() > control.column("f1").mean()
        assert treatment.column("f7").mean() < control.column("f7").mean()
        # untilted features stay put (well within noise)
        assert abs(treatment.column("f2").mean() - control.column("f2").mean()) < 0.05


@pytest.fixture(scope="module")
def report():
    ds = generate_criteo_shaped(n=30_000, seed=7)
    manifest = RunManifest(
        data_path="synthetic", out_dir="unused", targets=None,
        B=60, m=4000, seed=3, match_subsample=8000, match_B=20,
    )
    return criteo_repro(ds, manifest)


class TestRepro:
    def test_scenario_lands_between_branches(self, report):
        # targets are the treatment means, so the prediction should move
        # from the control rate toward the treatment rate
        c = report.control.summary["mean"]
        t = report.treatment.summary["mean"]
        s = report.scenario.summary["mean"]
        assert t > c
        assert s > c
        assert not report.prediction_below_control

    def test_matching_distribution_populated(self, report):
        assert report.matching.infeasible_fraction < 0.5
        assert len(report.matching.values) >= 10
        m = report.matching.summary["mean"]
        assert report.control.summary["mean"] < m  # moved toward treatment

    def test_counts_and_seed_recorded(self, report):
        assert report.n_control == 15_000
        assert report.n_treatment == 15_000
        assert report.seed == 3
        blob = report.to_dict()
        assert blob["direction_flags"]["prediction_below_control"] is False

    def test_explicit_targets_used_verbatim(self):
        ds = generate_criteo_shaped(n=4000, seed=9)
        control, _ = split_branches(ds)
        t1 = float(control.column("f1").mean()) + 0.01
        manifest = RunManifest(
            data_path="synthetic", out_dir="unused",
            scenario_features=("f1",), targets=(t1,),
            B=10, m=1000, seed=0, match_subsample=1000, match_B=5,
        )
        report = criteo_repro(ds, manifest)
        assert report.targets == (t1,)

    def test_missing_feature_rejected(self):
        ds = generate_criteo_shaped(n=400, seed=0)
        manifest = RunManifest(
            data_path="synthetic", out_dir="unused",
            scenario_features=("nope",), targets=(0.0,),
        )
        with pytest.raises(Exception, match="nope"):
            criteo_repro(ds, manifest)

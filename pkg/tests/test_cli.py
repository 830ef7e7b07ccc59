import csv
import json

import pytest

from whatif.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestValidate:
    def test_valid_scenario(self, capsys, double_males_json):
        code, out, _ = run(capsys, "validate", "--scenario", str(double_males_json))
        assert code == 0
        assert "1 constraint(s)" in out

    def test_bad_scenario_is_usage_error(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"constraints": [{"feature": "x"}]}')
        code, _, err = run(capsys, "validate", "--scenario", str(p))
        assert code == 2
        assert "usage error" in err

    def test_missing_file_is_data_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", "--scenario", str(tmp_path / "none.json"))
        assert code == 4
        assert "not found" in err

    def test_against_data_catches_range_violation(self, capsys, shoes_csv, male_age_100_json):
        csv_path, schema_path = shoes_csv
        code, _, err = run(
            capsys, "validate", "--scenario", str(male_age_100_json),
            "--data", str(csv_path), "--schema", str(schema_path),
        )
        assert code == 3
        assert "infeasible" in err


class TestSolve:
    def test_doubled_males_prints_estimate(self, capsys, tmp_path, shoes_csv, double_males_json):
        csv_path, schema_path = shoes_csv
        out_dir = tmp_path / "out"
        code, out, _ = run(
            capsys, "solve", "--data", str(csv_path), "--schema", str(schema_path),
            "--scenario", str(double_males_json), "--out", str(out_dir),
        )
        assert code == 0
        assert "price: 272.727" in out
        result = json.loads((out_dir / "result.json").read_text())
        assert result["estimates"]["price"] == pytest.approx(3000 / 11)
        assert result["status"] == "converged"
        assert "dataset_sha256" in result["provenance"]
        assert "scenario_sha256" in result["provenance"]
        with open(out_dir / "weights.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 7
        rels = sorted(round(float(r["relative_weight"]), 9) for r in rows)
        assert rels == sorted([round(14 / 11, 9)] * 4 + [round(7 / 11, 9)] * 3)

    def test_infeasible_exit_3_names_constraint(self, capsys, tmp_path, shoes_csv, male_age_100_json):
        csv_path, schema_path = shoes_csv
        code, _, err = run(
            capsys, "solve", "--data", str(csv_path), "--schema", str(schema_path),
            "--scenario", str(male_age_100_json), "--out", str(tmp_path / "o"),
        )
        assert code == 3
        assert "male-age-100" in err
        assert "range-violation" in err

    def test_missing_data_exit_4(self, capsys, tmp_path, shoes_csv, double_males_json):
        _, schema_path = shoes_csv
        code, _, err = run(
            capsys, "solve", "--data", str(tmp_path / "nope.csv"),
            "--schema", str(schema_path),
            "--scenario", str(double_males_json), "--out", str(tmp_path / "o"),
        )
        assert code == 4
        assert "data error" in err


class TestEstimate:
    def test_writes_values_and_summary(self, capsys, tmp_path, shoes_csv, double_males_json):
        csv_path, schema_path = shoes_csv
        out_dir = tmp_path / "est"
        code, out, _ = run(
            capsys, "estimate", "--data", str(csv_path), "--schema", str(schema_path),
            "--scenario", str(double_males_json), "--out", str(out_dir),
            "--B", "25", "--seed", "11",
        )
        assert code == 0
        assert "price: mean" in out
        payload = json.loads((out_dir / "estimate.json").read_text())
        assert payload["provenance"]["seed"] == 11
        assert payload["provenance"]["B"] == 25
        with open(out_dir / "values_price.csv") as f:
            values = [float(r["value"]) for r in csv.DictReader(f)]
        assert 0 < len(values) <= 25
        assert payload["price"]["summary"]["mean"] == pytest.approx(
            sum(values) / len(values)
        )

    def test_byte_identical_across_runs(self, capsys, tmp_path, shoes_csv, double_males_json):
        csv_path, schema_path = shoes_csv
        blobs = []
        for name in ("r1", "r2"):
            out_dir = tmp_path / name
            code, _, _ = run(
                capsys, "estimate", "--data", str(csv_path), "--schema", str(schema_path),
                "--scenario", str(double_males_json), "--out", str(out_dir),
                "--B", "20", "--seed", "5",
            )
            assert code == 0
            blobs.append((
                (out_dir / "estimate.json").read_bytes(),
                (out_dir / "values_price.csv").read_bytes(),
            ))
        assert blobs[0] == blobs[1]


class TestSweep:
    def test_1d_sweep_outputs(self, capsys, tmp_path, shoes_csv):
        csv_path, schema_path = shoes_csv
        out_dir = tmp_path / "sw"
        axis = json.dumps({"feature": "age", "grid": [0.98, 1.0, 1.02]})
        code, out, _ = run(
            capsys, "sweep", "--data", str(csv_path), "--schema", str(schema_path),
            "--grid-a", axis, "--out", str(out_dir), "--B", "15", "--seed", "2",
        )
        assert code == 0
        assert "swept 3 cell(s)" in out
        payload = json.loads((out_dir / "sweep.json").read_text())
        assert len(payload["cells"]) == 3
        with open(out_dir / "sweep.csv") as f:
            rows = list(csv.DictReader(f))
        assert [float(r["a_value"]) for r in rows] == [0.98, 1.0, 1.02]

    @pytest.mark.filterwarnings("ignore:level .* empty contour")
    def test_2d_sweep_with_contour(self, capsys, tmp_path, shoes_csv):
        csv_path, schema_path = shoes_csv
        out_dir = tmp_path / "sw2"
        axis_a = json.dumps({"feature": "age", "grid": [0.99, 1.01]})
        axis_b = json.dumps({"feature": "shoe_size", "grid": [0.99, 1.01]})
        code, _, _ = run(
            capsys, "sweep", "--data", str(csv_path), "--schema", str(schema_path),
            "--grid-a", axis_a, "--grid-b", axis_b, "--level", "255",
            "--out", str(out_dir), "--B", "15", "--seed", "2",
        )
        assert code == 0
        payload = json.loads((out_dir / "sweep.json").read_text())
        assert len(payload["cells"]) == 4
        assert payload["contour"]["level"] == 255

    def test_bad_axis_json_is_usage_error(self, capsys, tmp_path, shoes_csv):
        csv_path, schema_path = shoes_csv
        code, _, err = run(
            capsys, "sweep", "--data", str(csv_path), "--schema", str(schema_path),
            "--grid-a", "not json", "--out", str(tmp_path / "o"),
        )
        assert code == 2
        assert "usage error" in err


class TestMatch:
    def test_match_artifacts(self, capsys, tmp_path):
        gen_dir = tmp_path / "gen"
        code, _, _ = run(
            capsys, "gen-synth", "--out", str(gen_dir), "--n", "400",
            "--features", "2", "--seed", "1",
        )
        assert code == 0
        out_dir = tmp_path / "m"
        code, out, _ = run(
            capsys, "match", "--data", str(gen_dir / "control.csv"),
            "--schema", str(gen_dir / "schema.json"),
            "--treatment", str(gen_dir / "treatment.csv"),
            "--out", str(out_dir),
        )
        assert code == 0
        assert "(matched)" in out
        payload = json.loads((out_dir / "match.json").read_text())
        assert payload["n_pairs"] > 0
        assert "treatment_sha256" in payload["provenance"]
        with open(out_dir / "pairs.csv") as f:
            pairs = list(csv.DictReader(f))
        assert len(pairs) == payload["n_pairs"]
        controls = [p["control_row"] for p in pairs]
        assert len(set(controls)) == len(controls)  # without replacement


class TestGenSynth:
    def test_truth_file_written(self, capsys, tmp_path):
        out_dir = tmp_path / "g"
        code, _, _ = run(
            capsys, "gen-synth", "--out", str(out_dir), "--n", "200",
            "--features", "2", "--tilt", "0.2,0.1", "--seed", "3",
        )
        assert code == 0
        truth = json.loads((out_dir / "truth.json").read_text())
        assert truth["tilt"] == [0.2, 0.1]
        assert set(truth["truth"]) == {"x0", "x1", "outcome"}

    def test_criteo_shaped(self, capsys, tmp_path):
        out_dir = tmp_path / "gc"
        code, _, _ = run(
            capsys, "gen-synth", "--out", str(out_dir), "--n", "200",
            "--criteo-shaped", "--seed", "0",
        )
        assert code == 0
        assert (out_dir / "criteo_synth.csv").exists()
        schema = json.loads((out_dir / "criteo_synth.schema.json").read_text())
        assert len(schema["columns"]) == 15


class TestCriteoReproCommand:
    def test_runs_on_synthetic_fixture(self, capsys, tmp_path):
        gen_dir = tmp_path / "gen"
        run(capsys, "gen-synth", "--out", str(gen_dir), "--n", "4000",
            "--criteo-shaped", "--seed", "2")
        out_dir = tmp_path / "rep"
        code, out, _ = run(
            capsys, "criteo-repro", "--data", str(gen_dir / "criteo_synth.csv"),
            "--out", str(out_dir), "--targets", "auto",
            "--B", "15", "--m", "800", "--match-subsample", "1000",
        )
        assert code == 0
        assert "scenario mean" in out
        payload = json.loads((out_dir / "criteo_report.json").read_text())
        assert payload["n_control"] == 2000
        assert "direction_flags" in payload

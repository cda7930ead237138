import json
import subprocess
import sys

import numpy as np
import pytest

from trialdesign.cli import main
from trialdesign.report import (
    DesignReport,
    read_allocation_csv,
    read_matrix_csv,
    write_allocation_csv,
    write_matrix_csv,
)
from trialdesign.objective import Allocation

TOY = np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 1.0], [1.0, -1.0]])


def run_cli(capsys, *argv) -> tuple[int, dict | None, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    doc = json.loads(captured.out) if captured.out.strip() else None
    return code, doc, captured.err


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    write_matrix_csv(path, TOY, columns=("intercept", "marker"))
    return path


class TestSynth:
    def test_writes_matrix_and_summary(self, tmp_path, capsys):
        out = tmp_path / "synth.csv"
        code, doc, _ = run_cli(
            capsys, "synth", "--n", "12", "--p", "3", "--seed", "1", "--out", str(out)
        )
        assert code == 0
        assert doc["n"] == 12
        assert doc["p"] == 3
        assert len(doc["matrix_sha256"]) == 64
        matrix = read_matrix_csv(out)
        assert matrix.shape == (12, 3)
        assert np.all(matrix[:, 0] == 1.0)
        assert np.all(np.isin(matrix[:, 1:], (-1.0, 1.0)))

    def test_rejects_odd_n(self, tmp_path, capsys):
        code, doc, err = run_cli(
            capsys, "synth", "--n", "11", "--p", "2",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 1
        assert doc is None
        assert json.loads(err)["error"]["type"] == "ValueError"


class TestEncode:
    def test_csv_with_schema(self, tmp_path, capsys):
        csv_path = tmp_path / "raw.csv"
        csv_path.write_text(
            "id,sex,age\n1,M,b\n2,F,a\n3,M,\n4,F,c\n5,M,a\n6,F,b\n"
        )
        schema_path = tmp_path / "schema.json"
        schema_path.write_text(
            json.dumps(
                {
                    "columns": [
                        {"name": "sex", "kind": "binary", "levels": ["F", "M"]},
                        {
                            "name": "age",
                            "kind": "categorical",
                            "levels": ["a", "b", "c"],
                        },
                    ]
                }
            )
        )
        out = tmp_path / "encoded.csv"
        code, doc, _ = run_cli(
            capsys, "encode", "--csv", str(csv_path),
            "--schema", str(schema_path), "--out", str(out),
        )
        assert code == 0
        assert doc["excluded_rows"] == 1
        assert doc["n"] == 5
        assert doc["p"] == 4
        assert doc["columns"][0] == "intercept"
        assert read_matrix_csv(out).shape == (5, 4)


class TestDesign:
    def test_lb_on_toy(self, toy_csv, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        alloc_path = tmp_path / "alloc.csv"
        code, doc, _ = run_cli(
            capsys, "design", "--matrix", str(toy_csv), "--method", "lb",
            "--out", str(report_path), "--allocation-out", str(alloc_path),
        )
        assert code == 0
        assert doc["method"] == "LB_APPROX"
        assert doc["surrogate_value"] == pytest.approx(0.5, abs=1e-9)
        assert doc["status"] == "optimal"
        assert doc["parameters"]["method"] == "lb"
        assert doc["parameters"]["threads"] >= 1
        stored = DesignReport.load(report_path)
        assert stored.to_dict() == doc
        alloc = read_allocation_csv(alloc_path)
        assert alloc.x.tolist() == doc["allocation"]

    def test_exact_on_toy(self, toy_csv, capsys):
        code, doc, _ = run_cli(
            capsys, "design", "--matrix", str(toy_csv), "--method", "exact"
        )
        assert code == 0
        assert doc["method"] == "EXACT"
        assert doc["status"] == "optimal"
        assert doc["surrogate_value"] == pytest.approx(0.5, abs=1e-9)
        assert doc["diagnostics"]["iterations"] <= 2

    def test_rand_reports_both_quantile_sets(self, toy_csv, capsys):
        code, doc, _ = run_cli(
            capsys, "design", "--matrix", str(toy_csv), "--method", "rand",
            "--replicates", "30", "--seed", "2",
        )
        assert code == 0
        assert doc["method"] == "RAND"
        assert doc["status"] == "sampled"
        assert set(doc["diagnostics"]["quantiles"]) == {"surrogate", "original"}
        for values in doc["diagnostics"]["quantiles"]["surrogate"].values():
            assert values >= 0.5 - 1e-12
        assert len(doc["allocation"]) == 4

    def test_missing_matrix_is_reported(self, tmp_path, capsys):
        code, doc, err = run_cli(
            capsys, "design", "--matrix", str(tmp_path / "nope.csv"),
            "--method", "lb",
        )
        assert code == 1
        assert doc is None
        assert json.loads(err)["error"]["type"] == "FileNotFoundError"


class TestEvaluate:
    def test_round_trip_matches_design_values(self, toy_csv, tmp_path, capsys):
        alloc_path = tmp_path / "alloc.csv"
        code, design_doc, _ = run_cli(
            capsys, "design", "--matrix", str(toy_csv), "--method", "lb",
            "--allocation-out", str(alloc_path),
        )
        assert code == 0
        code, doc, _ = run_cli(
            capsys, "evaluate", "--matrix", str(toy_csv),
            "--allocation", str(alloc_path), "--replicates", "20",
            "--z0-count", "10", "--rand-designs", "6",
        )
        assert code == 0
        assert doc["surrogate_value"] == design_doc["surrogate_value"]
        assert doc["original_value"] == design_doc["original_value"]
        assert doc["surrogate_worst_z"][0] == 1.0
        assert doc["lb_value"] <= doc["surrogate_value"] + 1e-8
        assert set(doc["rand"]) == {"surrogate", "original"}
        assert doc["variance_reduction"]["z0_count"] == 10

    def test_variance_csv_written(self, toy_csv, tmp_path, capsys):
        alloc_path = tmp_path / "alloc.csv"
        write_allocation_csv(alloc_path, Allocation(np.array([1, 1, -1, -1])))
        var_path = tmp_path / "variance.csv"
        code, doc, _ = run_cli(
            capsys, "evaluate", "--matrix", str(toy_csv),
            "--allocation", str(alloc_path), "--replicates", "10",
            "--z0-count", "8", "--rand-designs", "4",
            "--variance-out", str(var_path),
        )
        assert code == 0
        lines = var_path.read_text().strip().splitlines()
        assert lines[0] == "z0,mean_variance,optimal_variance,reduction_percent"
        assert len(lines) == 9

    def test_confounded_allocation_skips_original(self, toy_csv, tmp_path, capsys):
        alloc_path = tmp_path / "alloc.csv"
        write_allocation_csv(alloc_path, Allocation(np.array([1, -1, 1, -1])))
        code, doc, _ = run_cli(
            capsys, "evaluate", "--matrix", str(toy_csv),
            "--allocation", str(alloc_path), "--replicates", "10",
            "--skip-variance",
        )
        assert code == 0
        assert doc["original_value"] is None
        assert doc["original_worst_z"] is None
        assert doc["surrogate_value"] == pytest.approx(1.0, abs=1e-9)
        assert "variance_reduction" not in doc

    def test_confounded_allocation_fails_variance_reduction(
        self, toy_csv, tmp_path, capsys
    ):
        alloc_path = tmp_path / "alloc.csv"
        write_allocation_csv(alloc_path, Allocation(np.array([1, -1, 1, -1])))
        code, doc, err = run_cli(
            capsys, "evaluate", "--matrix", str(toy_csv),
            "--allocation", str(alloc_path), "--replicates", "10",
            "--z0-count", "4", "--rand-designs", "2",
        )
        assert code == 1
        assert json.loads(err)["error"]["type"] == "ConfoundedDesign"

    def test_length_mismatch_is_reported(self, toy_csv, tmp_path, capsys):
        alloc_path = tmp_path / "alloc.csv"
        write_allocation_csv(alloc_path, Allocation(np.array([1, -1])))
        code, _, err = run_cli(
            capsys, "evaluate", "--matrix", str(toy_csv),
            "--allocation", str(alloc_path),
        )
        assert code == 1
        assert "allocation length" in json.loads(err)["error"]["message"]


class TestScan:
    def test_writes_pairs_csv(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        H = np.hstack([np.ones((10, 1)), rng.choice([-1.0, 1.0], size=(10, 2))])
        matrix_path = tmp_path / "H.csv"
        write_matrix_csv(matrix_path, H)
        out = tmp_path / "pairs.csv"
        code, doc, _ = run_cli(
            capsys, "scan", "--matrix", str(matrix_path), "--samples", "10",
            "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "original,surrogate"
        assert len(lines) == 11
        assert doc["samples"] == 10
        assert doc["confounded"] + sum(
            1 for line in lines[1:] if not line.startswith(",")
        ) == 10
        if doc["mean_relative_gap"] is not None:
            assert doc["mean_relative_gap"] >= 0.0


def test_console_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run(
        [
            sys.executable, "-m", "trialdesign.cli",
            "synth", "--n", "4", "--p", "1", "--out", str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["p"] == 1
    assert out.exists()

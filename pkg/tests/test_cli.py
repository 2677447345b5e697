"""End-to-end command-line behaviour: exit codes, reports, determinism."""

import json

import pytest

from nsdstab import MixingMatrix, PartitionedGain, gain_document
from nsdstab.cli import main


@pytest.fixture
def identity_gain_file(tmp_path):
    gain = PartitionedGain([[1, 1, 0, 0], [0, 0, 1, 1]], (2, 2))
    path = tmp_path / "gain.json"
    path.write_text(gain_document(gain, MixingMatrix.ones((2, 2))))
    return str(path)


@pytest.fixture
def rotation_gain_file(tmp_path):
    gain = PartitionedGain([[0, 1], [-1, 0]], (1, 1))
    path = tmp_path / "rotation.json"
    path.write_text(gain_document(gain))
    return str(path)


@pytest.fixture
def scalar_plant_file(tmp_path):
    doc = {
        "q": 1,
        "m": 1,
        "n": 1,
        "A": [-1.0],
        "B": [1.0],
        "C": [1.0],
        "D": [0.0],
        "Kbar": [1.0],
    }
    path = tmp_path / "plant.json"
    path.write_text(json.dumps(doc))
    return str(path)


def report_of(path):
    return json.loads(path.read_text())


class TestCertify:
    def test_identity_blocks_exit_zero(self, identity_gain_file, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            ["certify", identity_gain_file, "--samples", "1000", "--out", str(out)]
        )
        assert code == 0
        report = report_of(out)
        assert report["verdict"] == "certified-sufficient"
        assert report["individual_vl"]["overall"] == "certified"
        assert len(report["witnesses"]) == 5

    def test_rotation_refuted_with_counterexample(self, rotation_gain_file, tmp_path):
        out = tmp_path / "report.json"
        code = main(
            [
                "certify",
                rotation_gain_file,
                "--samples",
                "500",
                "--eig-tol",
                "0",
                "--out",
                str(out),
            ]
        )
        assert code == 2
        report = report_of(out)
        assert report["verdict"] == "refuted-by-counterexample"
        ce = report["falsification"]["counterexample"]
        assert ce is not None and ce["eigenvalue"][0] <= 0.0

    def test_inconclusive_exit_three(self, tmp_path):
        gain = PartitionedGain([[1.0, 1.0], [0.0, 0.0]], (1, 1))
        path = tmp_path / "boundary.json"
        path.write_text(gain_document(gain))
        code = main(["certify", str(path), "--samples", "200"])
        assert code == 3

    def test_malformed_file_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert main(["certify", str(bad)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_file_exit_one(self):
        assert main(["certify", "/nonexistent/gain.json"]) == 1

    def test_determinism_modulo_timestamp(self, identity_gain_file, tmp_path):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        argv = ["certify", identity_gain_file, "--samples", "500", "--seed", "11"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        r1, r2 = report_of(out1), report_of(out2)
        r1.pop("timestamp")
        r2.pop("timestamp")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


class TestWeights:
    def test_paper_shape_uniform_lambdas(self, tmp_path):
        doc = {"partition": [3, 2, 3], "lambdas": 1.0, "ratios": [[2, 3], [0.5], [1.5, 4]]}
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "weights.json"
        assert main(["weights", str(path), "--out", str(out)]) == 0
        report = report_of(out)
        assert len(report["gammas"]) == 18
        assert all(g > 0 for g in report["gammas"])
        assert report["max_ratio_error"] < 1e-12

    def test_single_group_doubling(self, tmp_path):
        path = tmp_path / "problem.json"
        path.write_text(json.dumps({"partition": [2], "ratios": [[2.0]]}))
        out = tmp_path / "weights.json"
        assert main(["weights", str(path), "--out", str(out)]) == 0
        assert report_of(out)["gammas"] == [1.0, 2.0]

    def test_zero_ratio_rejected(self, tmp_path):
        path = tmp_path / "problem.json"
        path.write_text(json.dumps({"partition": [2], "ratios": [[0.0]]}))
        assert main(["weights", str(path)]) == 1


class TestFalsify:
    def test_clean_gain_exit_zero(self, identity_gain_file):
        assert main(["falsify", identity_gain_file, "--samples", "500"]) == 0

    def test_rotation_strict_threshold_exit_two(self, rotation_gain_file):
        assert (
            main(["falsify", rotation_gain_file, "--samples", "200", "--eig-tol", "0"])
            == 2
        )


class TestSimulate:
    def test_scalar_stable_summary(self, scalar_plant_file, tmp_path, capsys):
        out = tmp_path / "sim.json"
        traj = tmp_path / "traj.csv"
        code = main(
            [
                "simulate",
                scalar_plant_file,
                "--eta",
                "0.1",
                "--horizon",
                "60",
                "--out",
                str(out),
                "--trajectory-out",
                str(traj),
            ]
        )
        assert code == 0
        assert "stable at all grid eta" in capsys.readouterr().out
        report = report_of(out)
        assert report["reduced_hurwitz"] is True
        assert all(report["stable"])
        header = traj.read_text().splitlines()[0]
        assert header == "t,x1,z1"

    def test_unstable_reduced_model_reported(self, tmp_path, capsys):
        doc = {
            "q": 1,
            "m": 1,
            "n": 1,
            "A": [-1.0],
            "B": [1.0],
            "C": [-1.0],
            "D": [0.0],
            "Kbar": [1.0],
        }
        path = tmp_path / "plant.json"
        path.write_text(json.dumps(doc))
        assert main(["simulate", str(path), "--horizon", "5"]) == 0
        assert "unstable reduced model" in capsys.readouterr().out

    def test_non_hurwitz_plant_exit_one(self, tmp_path):
        doc = {"q": 1, "m": 1, "n": 1, "A": [1.0], "B": [1.0], "C": [1.0], "D": [0.0]}
        path = tmp_path / "plant.json"
        path.write_text(json.dumps(doc))
        assert main(["simulate", str(path)]) == 1

    def test_eta_grid_flag(self, scalar_plant_file, tmp_path):
        out = tmp_path / "sim.json"
        code = main(
            [
                "simulate",
                scalar_plant_file,
                "--eta-grid",
                "0.5:1e-3:5",
                "--horizon",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        grid = report_of(out)["config"]["eta_grid"]
        assert len(grid) == 5 and grid[0] == pytest.approx(0.5)

    def test_eta_grid_comma_list(self, scalar_plant_file, tmp_path):
        out = tmp_path / "sim.json"
        code = main(
            [
                "simulate",
                scalar_plant_file,
                "--eta-grid",
                "0.2,0.1,0.05",
                "--horizon",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert report_of(out)["config"]["eta_grid"] == [0.2, 0.1, 0.05]

    def test_missing_kbar_exit_one(self, tmp_path):
        doc = {"q": 1, "m": 1, "n": 1, "A": [-1.0], "B": [1.0], "C": [1.0], "D": [0.0]}
        path = tmp_path / "plant.json"
        path.write_text(json.dumps(doc))
        assert main(["simulate", str(path)]) == 1


class TestPair:
    def test_feasible_pairing_exit_zero(self, tmp_path):
        gain = PartitionedGain([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], (2, 1))
        path = tmp_path / "gain.json"
        path.write_text(gain_document(gain))
        out = tmp_path / "pair.json"
        assert main(["pair", str(path), "--out", str(out)]) == 0
        report = report_of(out)
        assert report["total_assignments"] == 6
        best = report["reports"][0]
        assert best["assignment"] == [1, 2, 1]
        assert best["verdict"] == "certified-sufficient"

    def test_no_feasible_pairing_exit_three(self, rotation_gain_file):
        assert main(["pair", rotation_gain_file]) == 3

    def test_wide_matrix_smaller_than_outputs_exit_one(self, tmp_path):
        # document with n < m is already rejected by the loader
        path = tmp_path / "gain.json"
        path.write_text(
            json.dumps({"m": 3, "n": 2, "partition": [1, 1], "A": [1, 2, 3, 4, 5, 6]})
        )
        assert main(["pair", str(path)]) == 1


def test_usage_error_exit_one():
    assert main([]) == 1
    assert main(["unknown-command"]) == 1

import csv
import json

import numpy as np
import pytest

from app.cli.benchcli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from app.utils.matrix_io import read_matrix, write_matrix

RUN_HEADER = "strategy,repeat,iter,residual_fro,residual_spec_est,alpha,wall_ns"


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def sign_input(tmp_path):
    path = tmp_path / "sign.txt"
    path.write_text("2 2\n0.9 0\n0 -0.8\n")
    return path


class TestGen:
    def test_deterministic_bytes(self, tmp_path):
        first, second = tmp_path / "a.mtxb", tmp_path / "b.mtxb"
        for out in (first, second):
            code = main(["gen", "--kind", "gaussian", "--rows", "64", "--cols", "64", "--seed", "7", "--out", str(out)])
            assert code == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_prescribed_values(self, tmp_path, capsys):
        out = tmp_path / "p.mtxb"
        code = main([
            "gen", "--kind", "prescribed", "--values", "1,0.5", "--rows", "2", "--cols", "2", "--out", str(out),
        ])
        assert code == EXIT_OK
        np.testing.assert_allclose(np.linalg.svd(read_matrix(out), compute_uv=False), [1.0, 0.5], atol=1e-8)
        assert "rows=2 cols=2" in capsys.readouterr().out

    def test_zero_rows(self, tmp_path):
        code = main(["gen", "--kind", "gaussian", "--rows", "0", "--cols", "3", "--out", str(tmp_path / "a.mtxb")])
        assert code == EXIT_USAGE

    def test_unknown_kind(self, tmp_path):
        code = main(["gen", "--kind", "cauchy", "--rows", "2", "--cols", "2", "--out", str(tmp_path / "a.mtxb")])
        assert code == EXIT_USAGE


class TestRun:
    def test_golden_header_and_report(self, tmp_path, sign_input):
        out_csv = tmp_path / "run.csv"
        code = main([
            "run", "--function", "sign", "--in", str(sign_input), "--strategies", "prism-exact",
            "--out-csv", str(out_csv),
        ])
        assert code == EXIT_OK
        assert out_csv.read_text().splitlines()[0] == RUN_HEADER

        residuals = [float(row["residual_fro"]) for row in _rows(out_csv)]
        assert all(b < a for a, b in zip(residuals, residuals[1:]))

        report = json.loads(out_csv.with_suffix(".json").read_text())
        assert {"config", "versions", "runs"} <= set(report)
        assert report["versions"]["prng"]
        assert report["runs"][0]["status"] == "converged"
        assert report["config"]["function"] == "sign"

    def test_orthogonal_polar_input(self, tmp_path, random_orthogonal):
        path = tmp_path / "q.mtxb"
        write_matrix(path, random_orthogonal(16, seed=2))
        out_csv = tmp_path / "polar.csv"
        code = main([
            "run", "--function", "polar", "--in", str(path), "--strategies", "prism-exact", "--out-csv", str(out_csv),
        ])
        assert code == EXIT_OK
        rows = _rows(out_csv)
        assert len(rows) == 1
        assert rows[0]["iter"] == "0"
        assert float(rows[0]["residual_fro"]) <= 1e-12

    def test_sketched_repeats_recorded(self, tmp_path):
        out_csv = tmp_path / "run.csv"
        out_json = tmp_path / "report.json"
        code = main([
            "run", "--function", "sqrt", "--kind", "wishart", "--rows", "64", "--cols", "16", "--seed", "3",
            "--strategies", "prism-sketched:4:10", "--repeats", "2",
            "--out-csv", str(out_csv), "--out-json", str(out_json),
        ])
        assert code == EXIT_OK
        runs = json.loads(out_json.read_text())["runs"]
        assert [run["seed"] for run in runs] == [10, 11]
        assert {row["repeat"] for row in _rows(out_csv)} == {"0", "1"}

    def test_non_converged_run(self, tmp_path):
        path = tmp_path / "singular.txt"
        path.write_text("2 2\n1 0\n0 0\n")
        out_csv = tmp_path / "run.csv"
        code = main([
            "run", "--function", "sign", "--in", str(path), "--strategies", "taylor", "--max-iters", "5",
            "--out-csv", str(out_csv),
        ])
        assert code == EXIT_NUMERICAL
        report = json.loads(out_csv.with_suffix(".json").read_text())
        assert report["runs"][0]["status"] == "max_iters"

    def test_bad_strategy(self, tmp_path, sign_input):
        code = main([
            "run", "--function", "sign", "--in", str(sign_input), "--strategies", "newton",
            "--out-csv", str(tmp_path / "run.csv"),
        ])
        assert code == EXIT_USAGE

    def test_missing_input(self, tmp_path):
        code = main([
            "run", "--function", "sign", "--in", str(tmp_path / "absent.mtxb"), "--out-csv", str(tmp_path / "run.csv"),
        ])
        assert code == EXIT_USAGE

    def test_malformed_input(self, tmp_path):
        path = tmp_path / "bad.mtxb"
        path.write_bytes(b"MTXB" + bytes(3))
        code = main(["run", "--function", "sign", "--in", str(path), "--out-csv", str(tmp_path / "run.csv")])
        assert code == EXIT_USAGE

    def test_asymmetric_input(self, tmp_path):
        path = tmp_path / "upper.txt"
        path.write_text("2 2\n1 2\n0 1\n")
        code = main(["run", "--function", "sqrt", "--in", str(path), "--out-csv", str(tmp_path / "run.csv")])
        assert code == EXIT_USAGE

    def test_unknown_command(self):
        assert main(["plot"]) == EXIT_USAGE


class TestSweep:
    def test_unit_spectrum(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--function", "polar", "--vary", "sigma-min", "--values", "1", "--rows", "8", "--cols", "8",
            "--strategies", "taylor,prism-exact", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert out.read_text().splitlines()[0] == "vary,value,strategy,iterations,wall_ns,speedup,status"
        rows = _rows(out)
        assert [row["strategy"] for row in rows] == ["taylor", "prism-exact"]
        assert all(int(row["iterations"]) <= 1 for row in rows)
        assert float(rows[0]["speedup"]) == 1.0

    def test_empty_values(self, tmp_path):
        code = main([
            "sweep", "--function", "polar", "--vary", "sigma-min", "--values", "", "--rows", "8", "--cols", "8",
            "--out", str(tmp_path / "sweep.csv"),
        ])
        assert code == EXIT_USAGE

    def test_unknown_variable(self, tmp_path):
        code = main([
            "sweep", "--function", "polar", "--vary", "temperature", "--values", "1", "--rows", "8", "--cols", "8",
            "--out", str(tmp_path / "sweep.csv"),
        ])
        assert code == EXIT_USAGE

    @pytest.mark.slow
    def test_sigma_min_grid(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--function", "polar", "--vary", "sigma-min", "--values", "1e-8,1e-4,1e-1",
            "--rows", "128", "--cols", "128", "--tol", "1e-6", "--strategies", "taylor,prism-exact", "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = _rows(out)
        assert len(rows) == 6
        for taylor, prism in zip(rows[::2], rows[1::2]):
            assert taylor["value"] == prism["value"]
            assert int(prism["iterations"]) <= int(taylor["iterations"])


class TestOracle:
    def test_square_root(self, tmp_path):
        path, out = tmp_path / "a.txt", tmp_path / "root.mtxb"
        path.write_text("2 2\n4 0\n0 9\n")
        assert main(["oracle", "--function", "sqrt", "--in", str(path), "--out", str(out)]) == EXIT_OK
        np.testing.assert_allclose(read_matrix(out), np.diag([2.0, 3.0]), atol=1e-14)

    def test_check_against_iterative_result(self, tmp_path, capsys, spd_with_spectrum):
        path, result = tmp_path / "a.mtxb", tmp_path / "x.mtxb"
        write_matrix(path, spd_with_spectrum(np.linspace(0.5, 3.0, 12), seed=4))
        code = main([
            "run", "--function", "sqrt", "--in", str(path), "--strategies", "prism-exact", "--tol", "1e-12",
            "--out-csv", str(tmp_path / "run.csv"), "--save-result", str(result),
        ])
        assert code == EXIT_OK
        capsys.readouterr()
        assert main(["oracle", "--function", "sqrt", "--in", str(path), "--check", str(result)]) == EXIT_OK
        line = capsys.readouterr().out.strip()
        assert line.startswith("discrepancy_fro=")
        assert float(line.split("=")[1]) <= 1e-7

    def test_singular_inverse(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("2 2\n1 0\n0 0\n")
        assert main(["oracle", "--function", "inverse-cheb", "--in", str(path)]) == EXIT_NUMERICAL

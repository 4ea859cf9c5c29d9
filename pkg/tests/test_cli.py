import json
import subprocess
import sys

import numpy as np
import pytest

from structvar import io
from structvar.cli import EXIT_NUMERIC, EXIT_USAGE, main


@pytest.fixture
def simulated(tmp_path, capsys):
    assert main(["simulate", "--p", "12", "--n", "150", "--rank", "1", "--sparsity", "0.15",
                 "--seed", "4", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    return tmp_path, out


def test_simulate_files(simulated):
    d, out = simulated
    assert (d / "truth_p12_N150_seed4.json").exists()
    series, _ = io.read_series(d / "series_p12_N150_seed4.csv")
    assert series.shape == (151, 12)
    assert out["stability"]["rho"] == pytest.approx(0.7)
    assert out["rank"] == 1


def test_simulate_is_reproducible(tmp_path):
    for sub in ("a", "b"):
        assert main(["simulate", "--p", "5", "--n", "20", "--sparsity", "0.3", "--seed", "1",
                     "--out", str(tmp_path / sub)]) == 0
    a = (tmp_path / "a" / "series_p5_N20_seed1.csv").read_text()
    assert a == (tmp_path / "b" / "series_p5_N20_seed1.csv").read_text()


def test_estimate_with_truth(simulated, capsys):
    d, _ = simulated
    rc = main(["estimate", str(d / "series_p12_N150_seed4.csv"), "--model", "l+s", "--lambda", "100",
               "--mu", "30", "--alpha-div", "2", "--truth", str(d / "truth_p12_N150_seed4.json"),
               "--holdout", "10", "--out", str(d)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out["files"]) == {"components", "edges", "trace", "report"}
    rep = json.loads(open(out["files"]["report"]).read())
    assert 0 <= rep["tpr"] <= 100 and rep["pe"] is not None
    comps = io.read_transition(out["files"]["components"])
    assert comps.p == 12


def test_estimate_tuned_writes_scores(simulated, capsys):
    d, _ = simulated
    rc = main(["estimate", str(d / "series_p12_N150_seed4.csv"), "--tune", "bic", "--n-grid", "5",
               "--out", str(d)])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    lines = open(out["files"]["scores"]).read().splitlines()
    assert len(lines) == 6


def test_diagnose(simulated, capsys):
    d, _ = simulated
    assert main(["diagnose", "--truth", str(d / "truth_p12_N150_seed4.json"), "--grid", "64",
                 "--out", str(d)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["stable"] and rep["theta_grid_size"] == 64
    assert (d / "truth_p12_N150_seed4_stability.json").exists()


def test_diagnose_matrix(tmp_path, capsys):
    path = tmp_path / "B.csv"
    io.write_series(path, 1.5 * np.eye(3))
    assert main(["diagnose", "--matrix", str(path), "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["stable"] is False


def test_bench_deviation(tmp_path, capsys):
    assert main(["bench", "deviation-mc", "--p", "5", "--n", "40", "80", "--reps", "2", "--jobs",
                 "1", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["csv"].endswith("deviation-mc_p5_N40-80_seed0.csv")


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("STRUCTVAR_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", "--p", "4", "--n", "10", "--sparsity", "0.5"]) == 0
    assert (tmp_path / "env" / "truth_p4_N10_seed0.json").exists()


@pytest.mark.parametrize("argv", [
    ["simulate", "--p", "5", "--n", "10", "--sparsity", "0.2", "--rho", "1.2"],
    ["simulate", "--p", "5", "--n", "10", "--rank", "6"],
    ["estimate", "no_such_file.csv"],
    ["bench", "l+s", "--p", "10", "20"],
    ["bench", "lowrank", "--large"],
    ["bench", "lowrank", "--alpha-div", "2"],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_malformed_series_reports_location(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    assert main(["estimate", str(path), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "row 2, column 2" in capsys.readouterr().err


def test_singular_ols_is_numeric_failure(tmp_path, capsys):
    path = tmp_path / "short.csv"
    io.write_series(path, np.random.default_rng(0).standard_normal((4, 6)))
    assert main(["estimate", str(path), "--model", "ols", "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["estimate"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "structvar.cli", "simulate", "--p", "4", "--n",
                           "10", "--sparsity", "0.5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["series"].endswith(".csv")

import csv
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from martlab.cli import COVERAGE, SUBCOMMANDS, main


def c_samples(fn, t_max=2.5, points=251):
    return ",".join(f"{t!r}:{fn(t)!r}" for t in map(float, np.linspace(0, t_max, points)))


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out)])
    report = out / "report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None), out


def test_verify_cosh_multiplicative(tmp_path, capsys):
    code, rep, out = run(tmp_path, "verify-martingale", "--spec", "cosh lambda=1",
                         "--mode", "multiplicative")
    assert code == 0
    assert rep["status"] == "pass"
    assert {c["anchor"] for c in rep["checks"]} == {"Theorem 1 (a)"}
    assert rep["checks"][0]["params"]["claim"] == "no counterexample on probe grid"
    header = (out / "residuals.csv").read_text().splitlines()[0]
    assert header == "mode,s,t,x,residual"
    assert "PASS" in capsys.readouterr().out


def test_verify_table_cube_fails_with_witness(tmp_path, cube_csv):
    code, rep, out = run(tmp_path, "verify-martingale", "--spec", f"table {cube_csv}",
                         "--mode", "additive")
    assert code == 1
    first = rep["checks"][0]
    assert first["verdict"] == "fail"
    w = first["params"]["witness"]
    assert w["residual"] == pytest.approx(3 * w["x"] * (w["t"] - w["s"]), abs=1e-6)
    with open(out / "residuals.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        s, t, x = float(r["s"]), float(r["t"]), float(r["x"])
        assert float(r["residual"]) == pytest.approx(3 * x * (t - s), abs=1e-6)


def test_verify_with_monte_carlo(tmp_path):
    code, rep, _ = run(tmp_path, "verify-martingale", "--spec", "quadratic a=1", "--mode",
                       "additive", "--n", "20000")
    assert code == 0
    stats = rep["checks"][0]["stats"]
    # grid times 0.25, 0.5, 1, 2 give six (s, t) pairs, three test functions each
    assert stats["z_threshold"] == 4.0 and len(stats["mc"]) == 18
    code, rep, _ = run(tmp_path, "verify-martingale", "--spec", "quadratic a=1", "--mode",
                       "additive", "--n", "20000", "--times", "0,0.5,1,2")
    assert len(rep["checks"][0]["stats"]["mc"]) == 9


def test_heatpoly_decompose_prints_example(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "heatpoly", "decompose", "--constants", "1,1,0,0", "--n", "3")
    assert code == 0
    text = capsys.readouterr().out
    assert "(1)*H_2 + (1)*H_3" in text
    assert "C_0*H_3 + C_1*H_2 + C_2*H_1 + C_3*H_0" in text
    params = rep["checks"][0]["params"]
    assert params["appendix_constants"] == ["1", "1", "0", "0"]
    assert params["by_hermite_index"] == ["0", "0", "1", "1"]


@pytest.mark.parametrize("argv", [
    ["heatpoly", "build", "--constants", "1,0,0,0"],
    ["heatpoly", "defect", "--poly", "1*x^3*t^0,-3*x^1*t^1"],
    ["heatpoly", "hermite", "--k", "4"],
    ["heatpoly", "genfun", "--at", "0.7,0.9,1.3", "--K", "20"],
])
def test_heatpoly_actions(tmp_path, argv):
    code, rep, _ = run(tmp_path, *argv)
    assert code == 0 and rep["checks"][0]["anchor"] in ("Appendix", "Remark 4")


def test_heatpoly_defect_failure(tmp_path):
    code, rep, _ = run(tmp_path, "heatpoly", "defect", "--poly", "1*x^2*t^0")
    assert code == 1
    assert rep["checks"][0]["params"]["defect"] == "1*x^0*t^0"


def test_classify(tmp_path):
    code, rep, out = run(tmp_path, "classify", "--spec", "cosh lambda=2", "--mode",
                         "multiplicative")
    assert code == 0
    assert rep["checks"][0]["anchor"] == "Theorem 4 (ii)"
    assert rep["checks"][0]["params"]["lambda"] == pytest.approx(2.0, abs=1e-8)
    assert (out / "dalembert_grid.csv").read_text().startswith("x,y,residual\n")
    code, rep, _ = run(tmp_path, "classify", "--spec", "cos lambda=1", "--mode", "multiplicative")
    assert code == 1 and rep["checks"][0]["params"]["status"] == "out_of_scope"


def test_two_sigma(tmp_path):
    spec = "tdquad a=1 b=0 c=" + c_samples(math.sin)
    code, rep, out = run(tmp_path, "two-sigma", "--spec", spec, "--mode", "additive",
                         "--sigmas", "1,2")
    assert code == 0
    assert rep["checks"][0]["anchor"] == "Theorem 6 (b)"
    lines = (out / "c_samples.csv").read_text().splitlines()
    assert lines[0] == "t,c" and len(lines) == 5


def test_two_sigma_needs_two_sigmas(tmp_path):
    code, *_ = run(tmp_path, "two-sigma", "--spec", "cosh lambda=1", "--mode",
                   "multiplicative", "--sigmas", "1")
    assert code == 2


def test_growth(tmp_path):
    code, rep, _ = run(tmp_path, "growth", "--spec", "heatpoly terms=1*x^3*t^0,-3*x^1*t^1",
                       "--degree", "3", "--const", "3")
    assert code == 0
    assert rep["checks"][1]["params"]["label"] == "evidence"


def test_feq(tmp_path):
    code, rep, out = run(tmp_path, "feq", "--spec", "cosh lambda=1", "--equation", "dalembert")
    assert code == 0
    assert [c["anchor"] for c in rep["checks"]] == ["D'Alembert equation (dq1)",
                                                   "Cauchy exponential equation"]
    assert len((out / "dalembert_grid.csv").read_text().splitlines()) == 1 + 17 * 17


def test_simulate_dump(tmp_path):
    code, rep, out = run(tmp_path, "simulate", "--n", "5", "--times", "0,1,2")
    assert code == 0
    lines = (out / "ensemble.csv").read_text().splitlines()
    assert lines[0] == "path,t,value" and len(lines) == 1 + 5 * 3


def test_reflection(tmp_path):
    code, rep, _ = run(tmp_path, "reflection", "--spec", "cosh lambda=1", "--s", "0.5",
                       "--t", "1", "--n", "50000")
    assert code == 0 and rep["checks"][0]["anchor"] == "Lemma 1"


def test_coverage(tmp_path, capsys):
    code, rep, _ = run(tmp_path, "coverage")
    assert code == 0
    assert len(rep["checks"]) == len(COVERAGE)
    assert set(COVERAGE.values()) <= set(SUBCOMMANDS)
    for anchor in ("Theorem 1", "Theorem 5", "Theorem 7", "Lemma 1", "Appendix"):
        assert anchor in COVERAGE


@pytest.mark.parametrize("argv", [
    [],
    ["verify-martingale", "--spec", "cosh lambda=1", "--mode", "sideways"],
    ["verify-martingale", "--spec", "cosh lambda=1"],
    ["verify-martingale", "--spec", "cosh lambda=1", "--mode", "additive", "--tol", "-1"],
    ["verify-martingale", "--spec", "cosh lambda=1", "--mode", "additive", "--order", "0"],
    ["verify-martingale", "--spec", "nonsense", "--mode", "additive"],
    ["verify-martingale", "--spec", "expcombo a=0 b=0 lambda=1", "--mode", "additive"],
    ["verify-martingale", "--bogus"],
    ["feq", "--spec", "cosh lambda=1", "--format", "xml"],
    ["heatpoly", "decompose", "--constants", "1,x"],
    ["growth", "--spec", "cosh lambda=1"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for this run\nspec = cosh lambda=1\nmode = multiplicative\n"
                   "seed = 7\n")
    code, rep, _ = run(tmp_path, "verify-martingale", "--config", str(cfg))
    assert code == 0 and rep["config"]["seed"] == 7
    code, rep, _ = run(tmp_path, "verify-martingale", "--config", str(cfg), "--mode", "additive")
    assert code == 1 and rep["config"]["mode"] == "additive"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour=blue\n")
    assert main(["verify-martingale", "--config", str(bad)]) == 2


def test_default_seed_is_42(tmp_path):
    _, rep, _ = run(tmp_path, "simulate", "--n", "2")
    assert rep["config"]["seed"] == 42


def test_reports_are_deterministic(tmp_path):
    argv = ["verify-martingale", "--spec", "quadratic a=1 b=2", "--mode", "additive",
            "--n", "5000"]
    names = ("report.json", "residuals.csv", "checks.csv")
    main(argv + ["--out", str(tmp_path)])
    first = [(tmp_path / n).read_bytes() for n in names]
    main(argv + ["--out", str(tmp_path)])
    assert [(tmp_path / n).read_bytes() for n in names] == first


@pytest.mark.parametrize("fmt", ["json", "csv", "json,csv"])
def test_exit_status_independent_of_format(tmp_path, fmt):
    argv = ["classify", "--spec", "quadratic a=1 b=1", "--mode", "additive", "--format", fmt,
            "--out", str(tmp_path / fmt)]
    assert main(argv) == 1
    assert (tmp_path / fmt / "report.json").exists() == ("json" in fmt)
    assert (tmp_path / fmt / "checks.csv").exists() == ("csv" in fmt)


def test_module_entry_point_and_thread_cap(tmp_path):
    env = dict(os.environ, MARTLAB_THREADS="2")
    out = tmp_path / "sub"
    proc = subprocess.run([sys.executable, "-m", "martlab", "simulate", "--n", "10000",
                           "--out", str(out)], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert "status: pass" in proc.stdout
    first = (out / "ensemble.csv").read_bytes()
    main(["simulate", "--n", "10000", "--out", str(out)])
    assert (out / "ensemble.csv").read_bytes() == first

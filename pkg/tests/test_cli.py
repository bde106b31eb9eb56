import json
import os
import subprocess
import sys
from importlib import resources

import pytest

from petweedie.cli import build_parser, main
from petweedie import estimating, pet


def run(*args, env=None):
    full = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "petweedie.cli", *args], capture_output=True,
                          text=True, env=full)


@pytest.fixture
def swiss(tmp_path):
    path = tmp_path / "swiss.csv"
    path.write_text(resources.files("petweedie").joinpath("data/swiss_accidents.csv").read_text())
    return path


@pytest.fixture
def regression_csv(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--p", "1.5", "--m", "2", "--phi", "1", "--n", "400",
                 "--seed", "3", "-o", str(out)]) == 0
    ys = out.read_text().split()[1:]
    path = tmp_path / "d.csv"
    rows = ["y,x1,x2"] + [f"{y},{(i % 7) / 7},{((i * 3) % 11) / 11}" for i, y in enumerate(ys)]
    path.write_text("\n".join(rows) + "\n")
    return path


def test_indexes_summary(capsys):
    assert main(["indexes", "--summary", "--mean", "61.913", "--variance", "20350.350"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["p_di"] - 328.692) <= 1e-3 and abs(out["g0_di"] - 5.224) <= 1e-3


def test_gof_swiss(swiss, capsys):
    assert main(["gof", "--freq", str(swiss), "--p", "1.95", "--m", "0.155",
                 "--phi", "0.05"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["df"] == 2 and out["total"] == 119853
    assert [c["cell"] for c in out["cells"]] == ["0", "1", "2", "3", "4", "5+"]


def test_fit_report_deterministic(regression_csv, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["fit", "--data", str(regression_csv), "--response", "y", "--covariates", "x1,x2",
            "--p-init", "1.5", "--seed", "42", "--no-timestamp"]
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["seed"] == 42 and rep["fit"]["paic"] is not None
    assert [c["name"] for c in rep["coefficients"]] == ["(Intercept)", "x1", "x2"]


def test_fit_timestamp_and_csv(regression_csv, capsys):
    base = ["fit", "--data", str(regression_csv), "--response", "y", "--covariates", "x1"]
    assert main(base + ["--no-paic"]) == 0
    assert "timestamp" in json.loads(capsys.readouterr().out)
    assert main(base + ["--no-paic", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("name,estimate,std_error\n")


def test_pmf_methods(capsys):
    assert main(["pmf", "--p", "2.5", "--m", "1", "--phi", "1", "--y", "0-3"]) == 0
    quad = capsys.readouterr().out.splitlines()
    assert quad[0] == "y,pmf,std_error" and len(quad) == 5
    assert main(["pmf", "--p", "2.5", "--m", "1", "--phi", "1", "--y", "0,1",
                 "--method", "mc", "--draws", "100000"]) == 0
    mc = capsys.readouterr().out.splitlines()
    assert float(mc[1].split(",")[2]) > 0


def test_curves(capsys):
    assert main(["curves", "--p", "1.5", "--phi", "-0.1", "--m-min", "0.5", "--m-max", "5",
                 "--m-points", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "m,p_di,g0_di,p_zi,g0_zi" and len(lines) == 5


def test_indexes_data_with_test(tmp_path, capsys):
    path = tmp_path / "c.csv"
    assert main(["simulate", "--p", "2", "--m", "1", "--phi", "1", "--n", "2000",
                 "-o", str(path)]) == 0
    assert main(["indexes", "--data", str(path), "--test", "--bootstrap", "199"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["g0_test"]["p_value"] <= 0.05


def test_simstudy_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"p_values": [1.5], "phi_values": [1.0], "sample_sizes": [500],
                               "replicates": 3}))
    assert main(["simstudy", "--config", str(cfg)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "scenario,p,phi,n,parameter,bias,coverage,excluded"
    assert len(lines) == 6


def test_domain_error_exit_code(capsys):
    assert main(["pmf", "--p", "1.5", "--m", "-1", "--phi", "1"]) == 1
    assert "DomainError" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x\n1,2\n-1,3\n")
    assert main(["fit", "--data", str(bad), "--response", "y", "--covariates", "x"]) == 1
    assert "row 3" in capsys.readouterr().err


def test_missing_file_exit_code():
    assert main(["gof", "--freq", "/no/such.csv", "--p", "2", "--m", "1", "--phi", "1"]) == 1


def test_usage_errors():
    assert main(["pmf", "--p", "1.5"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["indexes", "--summary"]) == 2


def test_console_entry_point_exit_codes():
    assert run("indexes", "--summary", "--mean", "1", "--variance", "2").returncode == 0
    assert run("pmf", "--p", "1.5", "--m", "0", "--phi", "1").returncode == 1
    assert run("pmf").returncode == 2


def test_defaults_match_library():
    sub = build_parser()._subparsers._group_actions[0].choices
    fit = {a.dest: a.default for a in sub["fit"]._actions}
    assert fit["p_init"] == 1.5 and fit["alpha"] == 0.5 and fit["tol"] == 1e-8
    assert fit["max_iter"] == 200 and tuple(fit["p_bounds"]) == estimating.P_BOUNDS
    assert fit["draws"] == pet.DEFAULT_DRAWS
    pmf = {a.dest: a.default for a in sub["pmf"]._actions}
    assert pmf["x_nodes"] == pet.X_NODES and pmf["z_nodes"] == pet.Z_NODES


def test_thread_env_sets_default():
    env = dict(os.environ, PETWEEDIE_THREADS="3")
    code = ("from petweedie.cli import build_parser;"
            "p = build_parser()._subparsers._group_actions[0].choices['simstudy'];"
            "print({a.dest: a.default for a in p._actions}['workers'])")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "3"

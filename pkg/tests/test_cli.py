import csv
import json
import subprocess
import sys

import pytest

from orlicz_frac.cli import COLUMNS, main, run

P2 = {"family": "power", "params": [2]}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def load(out):
    return json.loads((out / "result.json").read_text())


def header(out):
    with open(out / "table.csv") as fh:
        return next(csv.reader(fh))


def test_check_young_power_two(tmp_path):
    out = tmp_path / "o"
    assert run("check-young", write(tmp_path, {"young": P2}), str(out), quiet=True) == 0
    res = load(out)["result"]
    for key in ("cond_L", "cond_L_prime", "G1", "G2", "young_inequality", "lipschitz", "duality", "all_pass"):
        assert res[key] is True
    assert header(out) == COLUMNS["check-young"]


def test_solve_end_to_end(tmp_path):
    out = tmp_path / "o"
    cfg = {"young": P2, "N": 128, "s": 0.5, "mu": 1.0}
    assert run("solve", write(tmp_path, cfg), str(out), quiet=True) == 0
    rec = load(out)
    res = rec["result"]
    assert res["residual"] <= 1e-7 and res["converged"]
    assert res["alpha"] == pytest.approx(res["lambda"], rel=1e-6)
    assert rec["config"]["N"] == 128 and rec["config"]["resolved"]["solver"]["tol"] == 1e-7
    assert "timestamp" not in (out / "result.json").read_text()
    assert "timestamp" in json.loads((out / "metadata.json").read_text())


def test_missing_N_is_config_error(tmp_path, capsys):
    code = run("solve", write(tmp_path, {"young": P2, "s": 0.5}), str(tmp_path / "o"))
    assert code == 1
    assert "'N'" in capsys.readouterr().err


@pytest.mark.parametrize("cfg,field", [
    ({"young": P2, "N": 2, "s": 0.5}, "N"),
    ({"young": P2, "N": 32, "s": 1.5}, "s"),
    ({"young": {"family": "power", "params": [0.5]}, "N": 32, "s": 0.5}, "young"),
    ({"young": P2, "N": 32, "s": 0.5, "mu": -1}, "mu"),
    ({"young": P2, "N": 32, "s": 0.5, "solver": {"bogus": 1}}, "solver.bogus"),
    ({"N": 32, "s": 0.5}, "young"),
])
def test_invalid_configs(tmp_path, capsys, cfg, field):
    assert run("solve", write(tmp_path, cfg), str(tmp_path / "o")) == 1
    assert f"'{field}'" in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run("solve", str(p), str(tmp_path / "o")) == 1
    assert run("solve", str(tmp_path / "missing.json"), str(tmp_path / "o")) == 1


def test_nonconvergence_exit_code(tmp_path):
    cfg = {"young": {"family": "power", "params": [3]}, "N": 64, "s": 0.5,
           "solver": {"max_iter": 2, "restarts": 1}}
    assert run("solve", write(tmp_path, cfg), str(tmp_path / "o"), quiet=True) == 2
    assert load(tmp_path / "o")["result"]["converged"] is False


def test_byte_identical_results(tmp_path):
    cfg = write(tmp_path, {"young": {"family": "power-log", "params": [1, 1, 1]}, "N": 64,
                           "s": 0.5, "mu_list": [0.5, 2.0], "seed": 3})
    run("sweep-mu", cfg, str(tmp_path / "a"), quiet=True)
    run("sweep-mu", cfg, str(tmp_path / "b"), quiet=True, threads=4)
    assert (tmp_path / "a" / "result.json").read_bytes() == (tmp_path / "b" / "result.json").read_bytes()
    assert (tmp_path / "a" / "table.csv").read_bytes() == (tmp_path / "b" / "table.csv").read_bytes()


SMALL = {"young": P2, "N": 64, "s": 0.5}


@pytest.mark.parametrize("sub,extra", [
    ("sweep-mu", {"mu_list": [0.1, 1, 10]}),
    ("sweep-s", {"s_list": [0.3, 0.6]}),
    ("dirichlet", {"rhs": {"type": "spike", "cell": 7}}),
    ("nodal", {}),
    ("homogenize", {"weight": {"profile": "sin", "eps_list": [0.5, 0.25, 0.125]}}),
    ("weight-limit", {"weight_sequence": {"widths": [0.5, 0.25]}}),
    ("gamma-limit", {"s_list": [0.5, 0.7], "N": 96}),
])
def test_subcommands(tmp_path, sub, extra):
    out = tmp_path / sub
    code = run(sub, write(tmp_path, {**SMALL, **extra}), str(out), quiet=True)
    assert code == 0
    assert header(out) == COLUMNS[sub]
    rec = load(out)
    assert rec["subcommand"] == sub


def test_dirichlet_reports_max_principles(tmp_path):
    out = tmp_path / "d"
    run("dirichlet", write(tmp_path, {**SMALL, "rhs": {"type": "constant", "value": 1}}), str(out), quiet=True)
    res = load(out)["result"]
    assert res["weak_max_principle"] and res["strong_max_principle"]


def test_homogenize_non_commensurate(tmp_path, capsys):
    cfg = {**SMALL, "weight": {"profile": "sin", "eps_list": [0.5, 0.3]}}
    assert run("homogenize", write(tmp_path, cfg), str(tmp_path / "o")) == 1
    assert "eps_list" in capsys.readouterr().err


def test_threads_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORLICZ_FRAC_THREADS", "zero")
    assert run("solve", write(tmp_path, {**SMALL}), str(tmp_path / "o")) == 1
    assert "ORLICZ_FRAC_THREADS" in capsys.readouterr().err
    monkeypatch.setenv("ORLICZ_FRAC_THREADS", "2")
    assert run("solve", write(tmp_path, {**SMALL}), str(tmp_path / "o"), quiet=True) == 0
    assert json.loads((tmp_path / "o" / "metadata.json").read_text())["threads"] == 2


def test_help_documents_columns():
    proc = subprocess.run([sys.executable, "-m", "orlicz_frac", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub, cols in COLUMNS.items():
        assert sub in proc.stdout and ", ".join(cols) in proc.stdout


def test_main_argv(tmp_path):
    cfg = write(tmp_path, {"young": P2})
    assert main(["check-young", "--config", cfg, "--out", str(tmp_path / "m"), "--quiet"]) == 0
    with pytest.raises(SystemExit):
        main(["unknown-cmd", "--config", cfg])

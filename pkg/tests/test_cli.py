"""CLI contracts: subcommands, artifacts, exit codes."""

import json
from pathlib import Path

import pytest

from robust_sysid.cli import cli_main

CFG = {
    "experiment": "compare_ls_l2",
    "scale": "desk",
    "system": {
        "kind": "activated_linear",
        "n": 5, "m": 2, "r": 3,
        "activation": "tanh",
        "rho": [0.5], "tau": [2],
        "input_gain": 0.05, "x0": 100.0, "T": 80,
    },
    "inputs": [{"name": "gaussian", "kind": "gaussian_iso", "mean": 0.0, "variance": 100.0}],
    "attack": {"p": 0.1, "kind": "signed_mean_gaussian", "params": [300.0, 1000.0, 25.0]},
    "basis": {"M": 8, "degree": 3, "form": "homogeneous", "n_fit_samples": 200},
    "solver": {"max_iters": 150, "rel_tol": 1e-8},
    "n_seeds": 1,
    "seed0": 0,
    "eval_points": 5,
    "excitation_mc": 100,
    "output_dir": "PLACEHOLDER",
}


@pytest.fixture
def cfg_path(tmp_path):
    doc = json.loads(json.dumps(CFG))
    doc["output_dir"] = str(tmp_path / "out")
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def test_experiment_writes_artifacts(cfg_path, tmp_path, capsys):
    assert cli_main(["experiment", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    assert (out / "results.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert "config_hash" in man
    assert "experiment[compare_ls_l2]" in capsys.readouterr().out


def test_simulate_and_fit_and_estimate(cfg_path, tmp_path, capsys):
    assert cli_main(["simulate", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "trajectory.csv").exists()
    assert (tmp_path / "out" / "system.json").exists()
    assert cli_main(["fit-gstar", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "out" / "gstar.json").exists()
    assert cli_main(["estimate", "--config", str(cfg_path)]) == 0
    rep = json.loads((tmp_path / "out" / "estimate_report.json").read_text())
    assert set(rep) == {"squared_l2", "l2"}


def test_check_writes_report(cfg_path, tmp_path):
    assert cli_main(["check", "--config", str(cfg_path), "--directions", "200"]) == 0
    assert (tmp_path / "out" / "checks.json").exists()
    assert (tmp_path / "out" / "checks.csv").exists()


def test_lowerbound_prints_gap(tmp_path, capsys):
    rc = cli_main([
        "lowerbound", "--rho", "0.5", "--tau", "3", "--T", "200", "--delta", "0.1",
        "--n-seeds", "20", "--output-dir", str(tmp_path / "lb"),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "gap L*rho^tau*c" in out and "pass=" in out
    assert (tmp_path / "lb" / "lowerbound.json").exists()


def test_unknown_flag_exits_2(cfg_path):
    assert cli_main(["experiment", "--config", str(cfg_path), "--bogus"]) == 2


def test_missing_config_exits_2(tmp_path):
    assert cli_main(["experiment", "--config", str(tmp_path / "absent.json")]) == 2


def test_bad_config_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"experiment": "compare_ls_l2"}))
    assert cli_main(["experiment", "--config", str(p)]) == 2


def test_numerical_failure_exits_3(tmp_path):
    # scalar system started beyond the overflow guard
    doc = {
        "experiment": "compare_ls_l2",
        "scale": "desk",
        "system": {"kind": "scalar_contract", "n": 1, "m": 1, "r": 1, "L": 1.0,
                   "rho": [0.5], "tau": [2], "x0": 5e12, "T": 50},
        "inputs": [{"name": "u", "kind": "uniform_box", "lo": -1.0, "hi": 1.0}],
        "attack": {"p": 0.0, "kind": "none", "params": []},
        "basis": {"kind": "linear"},
        "n_seeds": 1, "seed0": 0, "eval_points": 4, "excitation_mc": 100,
        "output_dir": str(tmp_path / "o"),
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    assert cli_main(["simulate", "--config", str(p)]) == 3


def test_seed_override_changes_manifest(cfg_path, tmp_path):
    assert cli_main(["experiment", "--config", str(cfg_path), "--seed", "3",
                     "--output-dir", str(tmp_path / "o2")]) == 0
    man = json.loads((tmp_path / "o2" / "manifest.json").read_text())
    assert man["config"]["seed0"] == 3

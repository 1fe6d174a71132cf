import json

import numpy as np
import pytest

from pinnlab.cli import main, parse_config_text, read_ppm_size, relative_l2, resolve_config
from pinnlab.errors import ConfigError, ZeroReference


def test_parse_config_text():
    cfg = parse_config_text("# comment\nh = 0.1\nhard_bc = false  # trailing\nalpha_B = 1, 100\nactivation = relu\n")
    assert cfg == {"h": 0.1, "hard_bc": False, "alpha_B": [1, 100], "activation": "relu"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


def test_resolve_config_coerces_and_rejects_unknown():
    cfg = resolve_config("poisson-adpinn", {"alpha_B": 100, "learning_rate": 1})
    assert cfg["alpha_B"] == [100] and cfg["learning_rate"] == 1.0
    with pytest.raises(ConfigError):
        resolve_config("poisson-fdm", {"bogus": 1})


def test_unknown_key_exits_with_config_error(tmp_path):
    assert main(["poisson-fdm", "--set", "bogus=1", "--out", str(tmp_path)]) == 1
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("h = 0.1\nwat = 3\n")
    assert main(["poisson-fdm", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_relative_l2_examples():
    assert relative_l2([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert relative_l2([0.0, 0.0], [3.0, 4.0]) == 1.0
    assert relative_l2([2.0, 0.0, 5.0], [1.0, 0.0, 9.0], mask=[True, True, False]) == 1.0
    with pytest.raises(ZeroReference):
        relative_l2([1.0], [0.0])
    with pytest.raises(ValueError):
        relative_l2([1.0, 2.0], [1.0])


def test_relative_l2_matches_direct_summation():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=500), rng.normal(size=500)
    num = den = 0.0
    for x, y in zip(a, b):
        num += (x - y) ** 2
        den += y * y
    assert abs(relative_l2(a, b) - (num / den) ** 0.5) <= 1e-14


def _results(out):
    return json.loads((out / "metrics.json").read_text())["results"]


def test_poisson_fdm_run(tmp_path):
    assert main(["poisson-fdm", "--out", str(tmp_path)]) == 0
    res = _results(tmp_path)
    assert (res["n_nodes"], res["n_interior"], res["n_boundary"]) == (1681, 1501, 180)
    assert res["relative_residual"] <= 1e-10
    assert read_ppm_size(tmp_path / "solution.ppm") == (101, 101)
    header = (tmp_path / "solution_nodes.csv").read_text().splitlines()[0]
    assert header == "x,y,u_fdm"


def test_certify_exit_zero(tmp_path):
    assert main(["certify", "--set", "h=0.1", "--set", "samples=20", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "witness_report.json").read_text())
    assert report["passed"]
    assert report["relu_fdpinn"]["max_abs_diff"] == 0.0


def test_certify_failure_exit_code(tmp_path):
    # an impossible tolerance makes the smooth checks fail
    assert main(["certify", "--set", "h=0.1", "--set", "samples=5", "--set", "smooth_rel_tol=0",
                 "--set", "ratio_tol=0", "--out", str(tmp_path)]) == 3


def test_example32_run(tmp_path):
    assert main(["example32", "--out", str(tmp_path)]) == 0
    res = _results(tmp_path)
    assert res["loss_a"] <= 1e-15 and res["loss_b"] <= 1e-15
    assert res["max_gap_on_unit_interval"] >= 0.05


def test_same_config_same_metrics(tmp_path):
    args = ["poisson-fdpinn", "--set", "h=0.25", "--set", "iterations=30", "--set", "hidden=8",
            "--set", "depth=2", "--set", "log_every=10", "--set", "resolution=11"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "metrics.json").read_bytes() == (tmp_path / "b" / "metrics.json").read_bytes()

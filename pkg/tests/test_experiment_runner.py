"""
批处理入口测试: 退出码、summary.json 和 CSV 输出
"""

import json

import numpy as np
import pandas as pd
import pytest

import experiment_runner
from experiment_config import ExperimentConfig
from experiment_runner import main, matched_lens_perimeter, run_experiment
from report_writer import ConsoleReporter


def _config(out_dir, **data):
    config = ExperimentConfig.from_dict(data)
    config.out_dir = str(out_dir)
    return config


def _run(config):
    return run_experiment(config, reporter=ConsoleReporter(use_rich=False))


def _summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text(encoding="utf-8"))


def test_spaceform_table(tmp_path):
    assert _run(_config(tmp_path, subcommand="spaceform-table")) == 0
    summary = _summary(tmp_path)
    assert summary["passed"]
    assert summary["summary"]["E_lambda2"] == 0.5
    assert summary["summary"]["H_lambda1_in_interval"] is False
    table = pd.read_csv(tmp_path / "radius_table.csv")
    assert len(table) == 18


def test_output_is_deterministic(tmp_path):
    config = _config(tmp_path, subcommand="check", lam=0.7, grid={"n": 1, "size": 128})
    assert _run(config) == 0
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert _run(config) == 0
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert first == second
    assert set(first) == {"summary.json", "curvature.csv"}


def test_measure_ball(tmp_path):
    config = _config(tmp_path, subcommand="measure", kind="H", body={"shape": "ball", "radius": 0.7},
                     grid={"n": 1, "size": 256})
    assert _run(config) == 0
    summary = _summary(tmp_path)["summary"]
    assert summary["area_relative_error"] <= 1e-8
    assert len(pd.read_csv(tmp_path / "measure.csv")) == 3


def test_check_reports_witness_node(tmp_path):
    config = _config(tmp_path, subcommand="check", lam=1.0, grid={"n": 1, "size": 256})
    assert _run(config) == 1
    document = _summary(tmp_path)
    assert not document["passed"]
    failure = document["failures"][0]
    assert "not λ-convex" in failure["message"]
    assert failure["witness_node"] in (64, 192)


def test_random_check_suite(tmp_path):
    config = _config(tmp_path, subcommand="check", rng_seed=5, body={"shape": "random", "trials": 20},
                     grid={"n": 1, "size": 128})
    assert _run(config) == 0
    trials = pd.read_csv(tmp_path / "blaschke_trials.csv")
    assert len(trials) == 20
    assert list(trials.columns) == ["trial", "lam", "min_kappa", "is_lambda_convex", "blaschke"]


def test_lens_anchor(tmp_path):
    config = _config(tmp_path, subcommand="lens", lam=1.0, grid={"n": 1, "size": 128},
                     lens={"distance": 1.0, "trials": 6, "beta_points": 5})
    assert _run(config) == 0
    summary = _summary(tmp_path)["summary"]
    assert abs(summary["rho"] - np.sqrt(3) / 2) < 1e-10
    assert abs(summary["margin"] - (1 - np.sqrt(3) / 2)) < 1e-10
    trials = pd.read_csv(tmp_path / "lens_trials.csv")
    assert (trials["margin"] > 0).all()
    assert list(pd.read_csv(tmp_path / "beta_profile.csv").columns) == ["t", "beta"]


def test_maximize_on_ball_is_trivial(tmp_path):
    config = _config(tmp_path, subcommand="maximize", lam=1.0, body={"shape": "ball", "radius": 1.0},
                     grid={"n": 1, "size": 64})
    assert _run(config) == 0
    document = _summary(tmp_path)
    assert document["summary"]["trivial"] is True
    trajectory = pd.read_csv(tmp_path / "trajectory.csv")
    assert list(trajectory.columns) == ["step", "t", "area", "volume", "b", "min_kappa", "case"]
    assert list(trajectory["step"]) == [0]


def test_config_errors_exit_with_two(tmp_path):
    bad = ExperimentConfig(subcommand="check", lam=-1.0, out_dir=str(tmp_path))
    assert _run(bad) == 2
    unbuildable = _config(tmp_path, subcommand="measure", kind="S", body={"shape": "ball", "radius": 2.0})
    assert _run(unbuildable) == 2


def test_unwritable_output_exits_with_one(tmp_path):
    blocker = tmp_path / "blocked"
    blocker.write_text("", encoding="utf-8")
    assert _run(_config(blocker, subcommand="spaceform-table")) == 1


def test_main_entry(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["spaceform-table", "--out", str(tmp_path / "out"), "--seed", "3"]) == 0
    assert _summary(tmp_path / "out")["config"]["rng_seed"] == 3
    assert main(["check", "--config", str(tmp_path / "missing.json")]) == 2


def test_env_tolerance_override(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("REVISO_TOL_CURVATURE", "0.25")
    out = tmp_path / "out"
    # 放宽后椭圆 (min κ₁ = 0.8) 通过 λ=1 的曲率检查, 但支撑球仍包不住它
    assert main(["check", "--out", str(out)]) == 1
    document = _summary(out)
    assert document["config"]["tolerances"]["curvature"] == 0.25
    assert document["summary"]["is_lambda_convex"] is True
    assert document["summary"]["blaschke"] is False


def test_matched_lens_perimeter():
    lens_area = 2 * np.pi / 3 - np.sqrt(3) / 2
    assert abs(matched_lens_perimeter(1.0, lens_area) - 4 * np.pi / 3) < 1e-10
    assert matched_lens_perimeter(1.0, 4.0) is None


@pytest.mark.slow
def test_perturb_subcommand(tmp_path):
    config = _config(tmp_path, subcommand="perturb", lam=0.7, grid={"n": 1, "size": 256},
                     perturbation={"steps": 2})
    assert _run(config) == 0
    trajectory = pd.read_csv(tmp_path / "trajectory.csv")
    assert list(trajectory["step"]) == [0, 1, 2]


def test_numerical_errors_become_failures(tmp_path, monkeypatch):
    def singular(config, verbose):
        raise np.linalg.LinAlgError("Singular matrix")

    monkeypatch.setitem(experiment_runner.SUBCOMMAND_HANDLERS, "measure", singular)
    assert _run(_config(tmp_path, subcommand="measure")) == 1
    document = _summary(tmp_path)
    assert document["passed"] is False
    failure = document["failures"][0]
    assert failure["check"] == "NumericalFailure"
    assert failure["cause"] == "LinAlgError"
    assert "Singular matrix" in failure["message"]

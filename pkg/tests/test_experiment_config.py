"""
实验配置测试
"""

import json

import pytest

from experiment_config import ExperimentConfig, ToleranceConfig
from geometry_errors import ConfigError
from spaceform_geometry import SpaceformKind


def test_defaults_are_valid():
    config = ExperimentConfig()
    config.validate()
    assert config.spaceform is SpaceformKind.EUCLIDEAN
    assert config.tolerances.curvature_for(1) == 1e-6
    assert config.tolerances.curvature_for(2) == 1e-3


def test_hash_covers_every_field():
    base = ExperimentConfig()
    assert base.config_hash() == ExperimentConfig().config_hash()
    changed = ExperimentConfig()
    changed.perturbation.bump_radius = 0.2
    assert changed.config_hash() != base.config_hash()
    assert len(base.config_hash()) == 64


def test_from_dict_builds_nested_sections():
    config = ExperimentConfig.from_dict({
        "subcommand": "lens", "kind": "S", "lam": 2.0,
        "grid": {"n": 2, "level": 3}, "lens": {"distance": 0.5, "trials": 4},
    })
    assert config.spaceform is SpaceformKind.SPHERICAL
    assert config.grid.level == 3
    assert config.grid.size == 512
    assert config.lens.trials == 4


@pytest.mark.parametrize("data", [
    {"colour": "blue"},
    {"grid": {"n": 1, "resolution": 3}},
    {"grid": 5},
    {"subcommand": "plot"},
    {"kind": "Minkowski"},
    {"grid": {"n": 3}},
    {"lam": 0.0},
    {"body": {"shape": "torus"}},
    {"body": {"shape": "file"}},
    {"perturbation": {"mode": "case3"}},
    {"perturbation": {"candidate_pairs": 0}},
    {"perturbation": {"margin_use": 0.0}},
    {"perturbation": {"margin_fraction": 1.0}},
    {"rng_seed": -1},
])
def test_invalid_configs_are_rejected(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"subcommand": "check", "lam": 0.7}), encoding="utf-8")
    config = ExperimentConfig.from_file(path)
    assert config.subcommand == "check"
    assert config.lam == 0.7

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(path)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")


def test_tolerance_env_overrides():
    tolerances = ToleranceConfig()
    applied = tolerances.apply_env_overrides({"REVISO_TOL_CURVATURE": "1e-5", "REVISO_TOL_VOLUME": ""})
    assert applied == ["curvature"]
    assert tolerances.curvature_for(2) == 1e-5
    assert tolerances.volume == 1e-12
    with pytest.raises(ConfigError):
        ToleranceConfig().apply_env_overrides({"REVISO_TOL_STALL": "tiny"})
    with pytest.raises(ConfigError):
        ToleranceConfig().apply_env_overrides({"REVISO_TOL_CONTAINMENT": "-1"})

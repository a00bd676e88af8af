"""Tests for config validation and serialization."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from cusp_balance.chow_balance import CoordLine, CycleConfig, Point, WeightedRNC
from cusp_balance.exceptions import ConfigError
from cusp_balance.schemas import (
    cycle_config_from_dict,
    cycle_config_to_dict,
    load_cycle_config,
    load_json,
    load_run_config,
    parse_parameters,
    parse_run_config,
)


def star_dict(**overrides):
    data = {
        "ambient_dim": 3,
        "components": [{"kind": "line", "indices": [i, 3]} for i in range(3)],
        "divisor": [0, 1, 2],
        "lambda": "1/2",
    }
    data.update(overrides)
    return data


def test_cycle_config_round_trip():
    """Test that a config survives JSON with an exact lambda."""
    config = CycleConfig(
        ambient_dim=3,
        components=(CoordLine(0, 3), WeightedRNC((0, 1, 2), (1.0, 2.0, 1.0)), Point(2)),
        divisor=(Point(0),),
        lam=Fraction(7, 11),
        weights=(1.0, 2.0, 0.5, 1.0),
    )
    data = json.loads(json.dumps(cycle_config_to_dict(config)))
    assert data["lambda"] == "7/11"
    assert cycle_config_from_dict(data) == config


def test_cycle_config_defaults():
    """Test default divisor, weights and RNC weights."""
    config = cycle_config_from_dict(
        {
            "ambient_dim": 2,
            "components": [{"kind": "rnc", "indices": [0, 1, 2]}],
            "lambda": 1,
        }
    )
    assert config.divisor == ()
    assert config.weights == (1.0, 1.0, 1.0)
    assert config.components[0].weights == (1.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "overrides",
    [
        {"lambda": 1.5},
        {"lambda": "7/0"},
        {"lambda": "seven"},
        {"colour": "red"},
        {"components": [{"kind": "line", "indices": [0, 1, 2]}]},
        {"components": [{"kind": "line", "indices": [0, 4]}]},
        {"components": [{"kind": "line", "indices": [1, 1]}]},
        {"components": [{"kind": "plane", "indices": [0, 1, 2]}]},
        {"divisor": [-1]},
        {"weights": [1.0, 1.0]},
        {"ambient_dim": True},
        {"divisor": [False]},
        {"lambda": True},
    ],
)
def test_cycle_config_invalid(overrides):
    """Test that schema and consistency errors become ConfigError."""
    with pytest.raises(ConfigError):
        cycle_config_from_dict(star_dict(**overrides))


def test_load_cycle_config(tmp_path):
    """Test loading a config file from disk."""
    path = tmp_path / "star.json"
    path.write_text(json.dumps(star_dict()), encoding="utf-8")
    config = load_cycle_config(path)
    assert config.lam == Fraction(1, 2)
    assert len(config.components) == 3


def test_load_json_errors(tmp_path):
    """Test missing files and malformed JSON."""
    with pytest.raises(ConfigError):
        load_json(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_json(broken)


def test_run_config_defaults():
    """Test defaults of a minimal run config."""
    config = parse_run_config({"command": "theta-check"})
    assert config.parameters == {"b": []}
    assert config.format == "json"
    assert config.threads == 1
    assert config.tol is None
    assert config.out is None


def test_run_config_full(tmp_path):
    """Test a complete run config file."""
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "command": "energy-scan",
                "parameters": {"g": 0, "l": 3, "d": 3, "k": [100, 200]},
                "format": "csv",
                "tol": 0.5,
                "threads": 2,
            }
        ),
        encoding="utf-8",
    )
    config = load_run_config(path)
    assert config.parameters["cross_class"] == "epsilon"
    assert config.parameters["bulk"] == "rescaled"
    assert config.format == "csv"
    assert config.threads == 2


@pytest.mark.parametrize(
    "data",
    [
        {"command": "unknown"},
        {"command": "theta-check", "extra": 1},
        {"command": "theta-check", "format": "xml"},
        {"command": "model-mu", "parameters": {"k": 4}},
        {"command": "model-mu", "parameters": {"k": 400, "a": [0]}},
        {"command": "energy-scan", "parameters": {"g": 0, "l": 3, "d": 3, "k": []}},
        {"command": "chow-verify", "parameters": {"d": 2, "k": 1}},
        {"command": "chow-verify", "parameters": {"d": 3, "k": True}},
        {"command": "model-mu", "parameters": {"k": 400, "a": [True]}},
        {"command": "theta-check", "threads": True},
    ],
)
def test_run_config_invalid(data):
    """Test that bad run configs are rejected."""
    with pytest.raises(ConfigError):
        parse_run_config(data)


def test_parse_parameters():
    """Test subcommand defaults."""
    params = parse_parameters("model-mu", {"k": 400.0})
    assert params == {"k": 400.0, "a": [], "sweep": False, "ladder": False}

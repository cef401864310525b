# tests/test_config.py
import json

import pytest

from config.experiment_config import load_config, parse_config
from config.settings import EXPERIMENT_CONFIG
from core.errors import ConfigError


def test_defaults():
    cfg = parse_config({})
    assert cfg.preset == "kls-origin"
    assert cfg.nonlinearity.p == 3
    assert cfg.initial.z0 == complex(0.03, 0.0)
    assert cfg.thresholds["cauchy_factor"] == EXPERIMENT_CONFIG["cauchy_factor"]


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="horizn"):
        parse_config({"horizn": 10})
    with pytest.raises(ConfigError, match="nonlinearity.q"):
        parse_config({"nonlinearity": {"q": 2}})


def test_bad_values():
    with pytest.raises(ConfigError, match="preset"):
        parse_config({"preset": "chaotic"})
    with pytest.raises(ConfigError):
        parse_config({"decay_window": [400, 20]})
    with pytest.raises(ConfigError):
        parse_config({"half_width": 0})
    with pytest.raises(ConfigError):
        parse_config({"initial": {"recipe": "snapshot"}})
    with pytest.raises(ConfigError):
        parse_config({"coin_csv": "/nonexistent/coin.csv"})


def test_tolerance_overrides_merge():
    cfg = parse_config({"tolerances": {"cauchy_threshold": 0.5}})
    assert cfg.thresholds["cauchy_threshold"] == 0.5
    assert cfg.thresholds["resolution_factor"] == EXPERIMENT_CONFIG["resolution_factor"]
    assert "wrap_threshold" in cfg.thresholds


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "free", "half_width": 128, "seed": 4}), encoding="utf-8")
    cfg = load_config(str(path))
    assert (cfg.preset, cfg.half_width, cfg.seed) == ("free", 128, 4)


def test_json_syntax_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "preset": "free",\n  "seed": ,\n}', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"broken\.json:3:\d+"):
        load_config(str(path))


def test_non_object_and_missing_file(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(path))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))

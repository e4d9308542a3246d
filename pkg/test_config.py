"""
Tests for configuration loading and validation.
"""

import json

import pytest

from config import (
    CONFIG_ENV_VAR,
    EAR_THRESHOLD,
    Config,
    config_from_snapshot,
    load_config,
)
from errors import ConfigError
from models import EmotionLabel


def test_defaults():
    cfg = Config()
    assert cfg.ear_threshold == EAR_THRESHOLD == 0.2
    assert cfg.drowsiness_seconds == 2.0
    assert cfg.window.length == 5.0
    assert cfg.window.origin == 0.0
    assert cfg.watermark_skew == 1.0
    assert cfg.attendance_coverage == 0.75
    assert cfg.fixed_n is None
    assert cfg.emotion_score_table[EmotionLabel.NEUTRAL] == 0.9
    assert cfg.emotion_score_table[EmotionLabel.DISGUST] == 0.1


def test_config_is_read_only():
    cfg = Config()
    with pytest.raises(Exception):
        cfg.ear_threshold = 0.3


@pytest.mark.parametrize("data", [
    {"ear_threshold": 0},
    {"ear_threshold": 1.5},
    {"drowsiness_seconds": -1},
    {"window": {"length": 0}},
    {"blink_anchors": {"bpm_norm_low": 30.0}},
    {"gaze_center_band": {"low": 0.7, "high": 0.6}},
    {"gaze_center_band": {"low": 0.0, "high": 0.5}},
    {"noise": {"quiet_db": 80.0}},
    {"fixed_n": 3},
    {"emotion_score_table": {"happy": 1.5}},
    {"emotion_score_table": {"bored": 0.5}},
    {"attendance_coverage": 2},
    {"unknown_key": 1},
])
def test_invalid_values(data):
    with pytest.raises(ValueError):
        Config.model_validate(data)


def test_partial_emotion_table_keeps_defaults():
    cfg = Config.model_validate({"emotion_score_table": {"neutral": 0.5}})
    assert cfg.emotion_score_table[EmotionLabel.NEUTRAL] == 0.5
    assert cfg.emotion_score_table[EmotionLabel.HAPPY] == 1.0
    assert len(cfg.emotion_score_table) == 7


def test_fixed_n_five():
    assert Config(fixed_n=5).fixed_n == 5


def test_load_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ear_threshold": 0.25, "window": {"length": 10.0}}))
    cfg = load_config(path)
    assert cfg.ear_threshold == 0.25
    assert cfg.window.length == 10.0
    assert cfg.drowsiness_seconds == 2.0


def test_load_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"watermark_skew": 0.5}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    assert load_config().watermark_skew == 0.5


def test_explicit_path_beats_environment(tmp_path, monkeypatch):
    env_path = tmp_path / "env.json"
    env_path.write_text(json.dumps({"watermark_skew": 0.5}))
    arg_path = tmp_path / "arg.json"
    arg_path.write_text(json.dumps({"watermark_skew": 2.0}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(env_path))
    assert load_config(arg_path).watermark_skew == 2.0


def test_defaults_without_environment(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
    assert load_config() == Config()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.json")


def test_bad_json(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_validation_error_names_field(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"noise": {"loud_db": -3}}))
    with pytest.raises(ConfigError, match="noise.loud_db"):
        load_config(path)


def test_snapshot_round_trip():
    cfg = Config(fixed_n=5, window={"length": 2.5, "origin": 1.0}, emotion_score_table={"sad": 0.4})
    snapshot = cfg.snapshot()
    json.dumps(snapshot)
    assert config_from_snapshot(snapshot) == cfg
    assert snapshot["emotion_score_table"]["sad"] == 0.4


def test_bad_snapshot():
    with pytest.raises(ConfigError, match="ear_threshold"):
        config_from_snapshot({"ear_threshold": "high"})

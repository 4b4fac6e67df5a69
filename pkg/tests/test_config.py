import json

import pytest

from tcwm.core.config import (
    PRESETS,
    OutputLayout,
    Settings,
    deep_merge,
    get_settings,
    load_experiment_config,
    load_preset,
    set_settings,
    validate_config,
)
from tcwm.core.errors import ConfigError


def test_empty_tree_is_a_valid_config():
    config = validate_config({})
    assert config.seed == 0
    assert config.world.kind == "generic"
    assert config.training.mode == "tcwm"


def test_section_seeds_default_to_the_experiment_seed():
    config = validate_config({"seed": 7, "training": {"seed": 3}})
    assert config.world.seed == 7
    assert config.training.seed == 3
    assert config.planner.cem.seed == 7
    assert config.planner.diffusion.seed == 7


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError) as err:
        validate_config({"model": {"d_z": 8, "width": 3}, "extra": 1})
    assert set(err.value.keys) == {"model.width", "extra"}
    assert "model.width" in str(err.value)


def test_invalid_values_are_reported():
    with pytest.raises(ConfigError, match="d_s"):
        validate_config({"model": {"d_z": 2, "d_s": 4}})
    with pytest.raises(ConfigError, match="elites"):
        validate_config({"planner": {"cem": {"population": 4, "elites": 8}}})


def test_train_and_model_modes_must_agree():
    with pytest.raises(ConfigError, match="direct-embedding"):
        validate_config({"training": {"mode": "direct-embedding"}})


def test_deep_merge_keeps_siblings():
    merged = deep_merge({"model": {"d_z": 8, "d_s": 2}, "seed": 1}, {"model": {"d_s": 4}})
    assert merged == {"model": {"d_z": 8, "d_s": 4}, "seed": 1}


@pytest.mark.parametrize("name", PRESETS)
def test_every_preset_validates(name):
    validate_config(load_preset(name))


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("fast")


def test_presets_overlay_the_file(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"seed": 4, "model": {"d_z": 12}}), encoding="utf-8")
    config = load_experiment_config(path, ["nav", "no-rec"])
    assert config.seed == 4
    assert config.world.kind == "nav"
    assert config.model.d_z == 8
    assert config.training.mode == "no-rec"


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_experiment_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        load_experiment_config(bad)
    bad.write_text("{oops", encoding="utf-8")
    with pytest.raises(ConfigError, match="valid UTF-8 JSON"):
        load_experiment_config(bad)


def test_settings_read_log_level_from_env(monkeypatch):
    monkeypatch.setenv("TCWM_LOG_LEVEL", "debug")
    assert Settings().log_level == "DEBUG"
    assert Settings("info").log_level == "INFO"


def test_settings_singleton():
    previous = get_settings()
    try:
        custom = Settings("error")
        set_settings(custom)
        assert get_settings() is custom
    finally:
        set_settings(previous)


def test_output_layout(tmp_path):
    layout = OutputLayout(tmp_path / "run")
    layout.ensure_dirs()
    assert layout.reports_path.is_dir()
    assert layout.report_file("train.csv") == tmp_path / "run" / "reports" / "train.csv"
    assert not layout.has_dataset() and not layout.has_checkpoint()

"""Experiment configuration loading, runtime settings and output paths."""

import json
import os
from importlib import resources
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from .errors import ConfigError
from .models import ExperimentConfig

LOG_LEVEL_ENV = "TCWM_LOG_LEVEL"

PRESETS = ("no-rec", "no-align", "direct-embedding", "split-sweep", "nav", "tanh-world")


class Settings:
    """Process-wide runtime settings read from the environment."""

    def __init__(self, log_level: str | None = None) -> None:
        self.log_level = (log_level or os.environ.get(LOG_LEVEL_ENV) or "WARNING").upper()


_settings: Settings | None = None


def get_settings() -> Settings:
    """Get global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def set_settings(settings: Settings) -> None:
    """Set global settings instance."""
    global _settings
    _settings = settings


class OutputLayout:
    """Directory layout under an experiment's --out directory."""

    def __init__(self, base_path: Path) -> None:
        self.base_path = Path(base_path)

    @property
    def dataset_path(self) -> Path:
        return self.base_path / "dataset"

    @property
    def checkpoint_path(self) -> Path:
        return self.base_path / "checkpoint"

    @property
    def reports_path(self) -> Path:
        return self.base_path / "reports"

    def ensure_dirs(self) -> None:
        """Create the base and report directories."""
        self.base_path.mkdir(parents=True, exist_ok=True)
        self.reports_path.mkdir(parents=True, exist_ok=True)

    def report_file(self, name: str) -> Path:
        return self.reports_path / name

    def has_dataset(self) -> bool:
        return (self.dataset_path / "meta.json").exists()

    def has_checkpoint(self) -> bool:
        return (self.checkpoint_path / "meta.json").exists()


def deep_merge(base: dict[str, Any], overlay: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``overlay`` into a copy of ``base``."""
    merged = dict(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_preset(name: str) -> dict[str, Any]:
    """Config overlay shipped with the package."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (known: {', '.join(PRESETS)})", [name])
    text = resources.files("tcwm.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _read_tree(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        tree = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"config {path} is not valid UTF-8 JSON: {e}") from e
    if not isinstance(tree, dict):
        raise ConfigError(f"config {path} must hold a JSON object at the top level")
    return tree


def validate_config(tree: dict[str, Any]) -> ExperimentConfig:
    """Strictly validate a key tree; unknown keys are listed in the error."""
    try:
        return ExperimentConfig.model_validate(tree)
    except ValidationError as e:
        unknown = [".".join(str(p) for p in err["loc"]) for err in e.errors() if err["type"] == "extra_forbidden"]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown) from e
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid config: {problems}") from e


def load_experiment_config(path: Path | None, presets: list[str] | None = None) -> ExperimentConfig:
    """Read ``path`` (or defaults), apply preset overlays, validate."""
    tree: dict[str, Any] = _read_tree(Path(path)) if path is not None else {}
    for name in presets or []:
        tree = deep_merge(tree, load_preset(name))
    return validate_config(tree)

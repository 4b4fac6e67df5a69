"""Core modules for tcwm."""

from .config import OutputLayout, Settings, get_settings, load_experiment_config
from .errors import (
    ConfigError,
    DatastoreError,
    DimensionError,
    DomainError,
    NumericError,
    PlannerError,
    TcwmError,
    TrainingError,
)
from .models import ExperimentConfig

__all__ = [
    "OutputLayout",
    "Settings",
    "get_settings",
    "load_experiment_config",
    "ExperimentConfig",
    "ConfigError",
    "DatastoreError",
    "DimensionError",
    "DomainError",
    "NumericError",
    "PlannerError",
    "TcwmError",
    "TrainingError",
]

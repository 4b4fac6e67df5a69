"""tcwm - task-centric world model laboratory."""

__version__ = "0.1.0"

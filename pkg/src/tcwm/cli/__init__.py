"""CLI commands for tcwm."""

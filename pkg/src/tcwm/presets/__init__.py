"""Config overlays for ablations and world variants."""

"""Per-pixel quasi-stationary pulse maps."""

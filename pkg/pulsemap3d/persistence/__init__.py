"""On-disk artifacts: raw float32 maps with JSON sidecars and the per-subject workspace."""

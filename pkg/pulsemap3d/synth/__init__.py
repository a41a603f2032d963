"""Synthetic multi-view scenes with known perfusion, used as the pipeline's ground truth."""

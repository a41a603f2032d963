"""Evaluation: correlations, circular statistics, reprojection error and aggregation."""

"""Circular statistics for phase maps (radians)."""

from __future__ import annotations

import numpy as np

from ..maps.engine import wrap_angle


def circular_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Absolute angular distance in [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def mean_resultant(
    angles: np.ndarray, axis: int | None = None, weights: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Circular mean angle and mean resultant length ``R``; NaN angles are skipped.

    The mean is NaN where nothing is left or the phasors cancel exactly.
    """
    ang = np.asarray(angles, dtype=float)
    ok = np.isfinite(ang)
    w = np.ones(ang.shape) if weights is None else np.broadcast_to(weights, ang.shape).astype(float)
    w = np.where(ok, w, 0.0)
    z = (w * np.exp(1j * np.where(ok, ang, 0.0))).sum(axis=axis)
    wsum = w.sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(z) / wsum
    mean = np.where((wsum > 0) & (np.abs(z) > 0), wrap_angle(np.angle(z)), np.nan)
    return mean, np.where(wsum > 0, r, np.nan)


def circular_mean(angles: np.ndarray, axis: int | None = None) -> np.ndarray:
    return mean_resultant(angles, axis)[0]


def circular_std(angles: np.ndarray, axis: int | None = None) -> np.ndarray:
    """``sqrt(-2 ln R)``; zero for identical angles, infinite for cancelling phasors."""
    _, r = mean_resultant(angles, axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(-2.0 * np.log(np.minimum(r, 1.0)))


def align_offset(recovered: np.ndarray, truth: np.ndarray) -> float:
    """Global phase offset (circular mean of ``recovered - truth``) over valid pairs."""
    d = np.asarray(recovered, dtype=float) - np.asarray(truth, dtype=float)
    return float(circular_mean(d[np.isfinite(d)]))

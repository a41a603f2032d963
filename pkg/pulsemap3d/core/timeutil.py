from __future__ import annotations

import numpy as np

from .errors import SpanMismatch


def frame_times(n_frames: int, fs: float, t0: float = 0.0) -> np.ndarray:
    """Timestamps of ``n_frames`` uniformly sampled frames starting at ``t0`` (seconds)."""
    return t0 + np.arange(n_frames, dtype=float) / float(fs)


def overlap_span(
    t_a: np.ndarray, t_b: np.ndarray, min_overlap_s: float = 0.0
) -> tuple[float, float]:
    """Return the common time span ``[start, end]`` covered by both time axes.

    Args:
        t_a: Monotonic timestamps of the first signal.
        t_b: Monotonic timestamps of the second signal.
        min_overlap_s: Required length of the common span.

    Returns:
        ``(start, end)`` in the same time base as the inputs.

    Raises:
        SpanMismatch: If the spans do not overlap by at least ``min_overlap_s``.
    """
    if len(t_a) < 2 or len(t_b) < 2:
        raise SpanMismatch("Both signals need at least two samples")
    start = max(float(t_a[0]), float(t_b[0]))
    end = min(float(t_a[-1]), float(t_b[-1]))
    if end - start <= max(min_overlap_s, 0.0):
        raise SpanMismatch(
            f"Signals overlap for {max(end - start, 0.0):.3f} s, "
            f"need more than {min_overlap_s:.3f} s"
        )
    return start, end


def resample_uniform(
    t: np.ndarray, values: np.ndarray, fs: float, start: float, end: float
) -> np.ndarray:
    """Linearly resample ``values`` sampled at ``t`` onto a uniform grid in ``[start, end]``."""
    t = np.asarray(t, dtype=float)
    if np.any(np.diff(t) <= 0):
        order = np.argsort(t, kind="stable")
        t = t[order]
        values = np.asarray(values, dtype=float)[order]
    n = int(np.floor((end - start) * fs + 1e-9)) + 1
    grid = start + np.arange(n, dtype=float) / fs
    return np.interp(grid, t, np.asarray(values, dtype=float))

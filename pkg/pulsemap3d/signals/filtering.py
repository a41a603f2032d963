"""Zero-phase Butterworth filtering, intensity normalization and analytic signals.

Array variants operate on the last axis so that a whole block of pixels can be filtered in one
call; the ``ScalarSignal`` wrappers validate and raise.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.signal import butter, hilbert, sosfiltfilt

from ..core.errors import DegenerateReference, InvalidBand, NonPositiveBaseline, TooShort
from ..models import AnalyticSignal, ScalarSignal

DEFAULT_ORDER = 4
MIN_ANALYTIC_LENGTH = 8
DEGENERATE_REFERENCE_TOL = 1e-12
# imaginary part of sum(Re{h} h), relative to its real part, that still counts as real
CIRCULAR_TOL = 1e-12


@lru_cache(maxsize=64)
def _butter_sos(btype: str, cutoff: tuple[float, ...], fs: float, order: int) -> np.ndarray:
    wn = cutoff[0] if len(cutoff) == 1 else list(cutoff)
    return butter(order, wn, btype=btype, fs=fs, output="sos")


def _padlen(sos: np.ndarray) -> int:
    # same default as scipy.signal.sosfiltfilt
    n_zeros = min(int((sos[:, 2] == 0).sum()), int((sos[:, 5] == 0).sum()))
    return 3 * (2 * len(sos) + 1 - n_zeros)


def _filtfilt(x: np.ndarray, sos: np.ndarray) -> np.ndarray:
    if x.shape[-1] <= _padlen(sos):
        raise TooShort(
            f"Signal of {x.shape[-1]} samples is too short for a {2 * len(sos)}-pole filter"
        )
    return sosfiltfilt(sos, x, axis=-1)


def lowpass_array(
    x: np.ndarray, fs: float, cutoff_hz: float, order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Forward-backward Butterworth lowpass along the last axis.

    Raises:
        InvalidBand: If ``cutoff_hz`` is not inside (0, fs/2).
        TooShort: If the signal cannot be padded for filtering.
    """
    if not 0 < cutoff_hz < fs / 2:
        raise InvalidBand(f"Lowpass cutoff {cutoff_hz} Hz outside (0, {fs / 2}) Hz")
    sos = _butter_sos("lowpass", (float(cutoff_hz),), float(fs), order)
    return _filtfilt(np.asarray(x, dtype=float), sos)


def lowpass(s: ScalarSignal, cutoff_hz: float, order: int = DEFAULT_ORDER) -> ScalarSignal:
    return ScalarSignal(lowpass_array(s.samples, s.fs, cutoff_hz, order), s.fs)


def bandpass_array(
    x: np.ndarray, fs: float, lo_hz: float, hi_hz: float, order: int = DEFAULT_ORDER
) -> np.ndarray:
    """Forward-backward Butterworth bandpass along the last axis.

    Raises:
        InvalidBand: Unless ``0 < lo_hz < hi_hz < fs/2``.
    """
    if not 0 < lo_hz < hi_hz < fs / 2:
        raise InvalidBand(f"Band [{lo_hz}, {hi_hz}] Hz invalid for fs={fs} Hz")
    sos = _butter_sos("bandpass", (float(lo_hz), float(hi_hz)), float(fs), order)
    return _filtfilt(np.asarray(x, dtype=float), sos)


def bandpass(
    s: ScalarSignal, lo_hz: float, hi_hz: float, order: int = DEFAULT_ORDER
) -> ScalarSignal:
    return ScalarSignal(bandpass_array(s.samples, s.fs, lo_hz, hi_hz, order), s.fs)


def detrend_normalize_array(
    x: np.ndarray, fs: float, cutoff_hz: float, order: int = DEFAULT_ORDER
) -> tuple[np.ndarray, np.ndarray]:
    """Normalize intensity traces by their slow baseline: ``(x - lp(x)) / lp(x)``.

    Args:
        x: Traces with time on the last axis.
        fs: Sample rate in Hz.
        cutoff_hz: Baseline lowpass cutoff.

    Returns:
        ``(normalized, ok)``; ``ok`` flags traces whose baseline stayed strictly positive.
        Rows that are not ok are NaN.
    """
    x = np.asarray(x, dtype=float)
    baseline = lowpass_array(x, fs, cutoff_hz, order)
    ok = np.all(baseline > 0, axis=-1)
    safe = np.where(ok[..., None], baseline, 1.0)
    out = (x - safe) / safe
    out[~ok] = np.nan
    return out, ok


def detrend_normalize(
    s: ScalarSignal, cutoff_hz: float, order: int = DEFAULT_ORDER
) -> ScalarSignal:
    """Scale-invariant pulsatile component of a positive intensity signal.

    Raises:
        NonPositiveBaseline: If the lowpass baseline touches zero anywhere.
    """
    out, ok = detrend_normalize_array(s.samples, s.fs, cutoff_hz, order)
    if not bool(ok):
        raise NonPositiveBaseline("Lowpass baseline is not strictly positive (dark pixel)")
    return ScalarSignal(out, s.fs)


def analytic_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < MIN_ANALYTIC_LENGTH:
        raise TooShort(f"Analytic signal needs at least {MIN_ANALYTIC_LENGTH} samples")
    return hilbert(x, axis=-1)


def analytic(s: ScalarSignal) -> AnalyticSignal:
    """Analytic signal ``s + i*H{s}``; the real part reproduces the input."""
    return AnalyticSignal(analytic_array(s.samples), s.fs)


def reference_factor(h: AnalyticSignal) -> complex:
    """Complex factor ``a`` with ``sum(Re{a h} * a h) == 1``.

    With ``a = r * exp(i*phi)`` the condition reads ``r**2 * F(phi) = 1`` where
    ``F(phi) = exp(i*phi) * sum(Re{exp(i*phi) h} * h)``. If ``F(0)`` is already real to
    within ``CIRCULAR_TOL`` the factor is real. Otherwise ``F`` is real exactly at the
    stationary angles of the quadratic form of the Gram matrix of (Re h, Im h) and the one
    closest to zero is used, so an already scaled reference gets ``a == 1``.

    Raises:
        DegenerateReference: If ``|sum(Re{h} * h)|`` is below 1e-12.
    """
    z = h.samples
    x, y = z.real, z.imag
    sxx = float(np.sum(x * x))
    sxy = float(np.sum(x * y))
    syy = float(np.sum(y * y))
    norm = abs(complex(sxx, sxy))
    if norm < DEGENERATE_REFERENCE_TOL:
        raise DegenerateReference(f"Reference self-projection {norm:.3e} vanishes")
    # a circular analytic signal (a sinusoid over whole periods) leaves the angle undetermined
    if abs(sxy) <= CIRCULAR_TOL * sxx:
        return complex(1.0 / np.sqrt(sxx))

    phi0 = 0.5 * np.arctan2(-2.0 * sxy, sxx - syy)
    candidates = sorted({phi0, phi0 - np.pi / 2, phi0 + np.pi / 2}, key=abs)
    for phi in candidates:
        if abs(phi) > np.pi / 2 + 1e-12:
            continue
        c, s = np.cos(phi), np.sin(phi)
        value = sxx * c * c - 2.0 * sxy * s * c + syy * s * s
        if value > DEGENERATE_REFERENCE_TOL:
            return complex(np.exp(1j * phi) / np.sqrt(value))
    raise DegenerateReference("Reference has no admissible scaling")


def scale_reference(h: AnalyticSignal) -> AnalyticSignal:
    """``h`` scaled by :func:`reference_factor` so that ``sum(Re{out} * out) == 1``.

    Raises:
        DegenerateReference: If ``|sum(Re{h} * h)|`` is below 1e-12.
    """
    return AnalyticSignal(reference_factor(h) * h.samples, h.fs)

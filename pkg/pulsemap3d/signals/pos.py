"""Plane-orthogonal-to-skin pulse extraction and the whole-face reference signal.

``pos_array`` evaluates the sliding-window POS projection for many traces at once. For a
window ``w`` with per-channel means ``m_c`` the tuned projection ``h = S1 + alpha * S2`` is
linear in the normalized channels, so the overlap-add output is

    H[t] = sum_c x_c[t] * K_c[t] - D[t]

where ``K_c`` and ``D`` are sums of per-window coefficients over the windows covering ``t``.
All window statistics come from cumulative sums, so the cost does not depend on the window
length.
"""

from __future__ import annotations

import logging

import numpy as np

from ..core.errors import EmptyMask, NonPositiveBaseline, SignalTooShort, ZeroVariance
from ..core.logging import get_logger, log_with_context
from ..core.timeutil import overlap_span, resample_uniform
from ..core.units import bpm_to_hz, hz_to_bpm
from ..models import (
    ReferenceBundle,
    RgbFrameSequence,
    RgbSignal,
    ScalarSignal,
    SkinMask,
    ValidationReport,
)
from .filtering import analytic, bandpass, scale_reference
from .spectral import dominant_frequency, power_spectrum

logger = get_logger("signals.pos")

DEFAULT_WINDOW_S = 1.6
# windows whose projected variance is below this carry no pulse information
ZERO_VARIANCE_TOL = 1e-24


def window_length(window_s: float, fs: float) -> int:
    return max(int(round(window_s * fs)), 2)


def _window_sums(cs: np.ndarray, length: int) -> np.ndarray:
    """Sums over all windows of ``length`` samples from a zero-prefixed cumulative sum."""
    return cs[..., length:] - cs[..., :-length]


def _spread(per_window: np.ndarray, length: int, n: int) -> np.ndarray:
    """For each sample ``t`` sum the per-window values of all windows covering ``t``."""
    n_win = per_window.shape[-1]
    cs = np.concatenate(
        [np.zeros(per_window.shape[:-1] + (1,)), np.cumsum(per_window, axis=-1)], axis=-1
    )
    t = np.arange(n)
    hi = np.minimum(t, n_win - 1) + 1
    lo = np.maximum(t - length + 1, 0)
    return cs[..., hi] - cs[..., lo]


def pos_array(
    rgb: np.ndarray, fs: float, window_s: float = DEFAULT_WINDOW_S
) -> tuple[np.ndarray, np.ndarray]:
    """POS pulse traces for a batch of RGB traces.

    Args:
        rgb: Array ``(..., 3, N)`` of positive intensities (channels r, g, b).
        fs: Sample rate in Hz.
        window_s: Projection window in seconds.

    Returns:
        ``(pulse, ok)``: pulse traces ``(..., N)`` and a flag per trace that is False where the
        input was not strictly positive. Traces without temporal variation come out as zeros.
    """
    rgb = np.asarray(rgb, dtype=float)
    n = rgb.shape[-1]
    length = window_length(window_s, fs)
    if n < length:
        raise SignalTooShort(f"Signal of {n} samples is shorter than the POS window of {length}")

    ok = np.all(rgb > 0, axis=(-2, -1))
    safe = np.where(ok[..., None, None], rgb, 1.0)
    # relative fluctuation around the global channel mean keeps the window statistics exact
    x = safe / safe.mean(axis=-1, keepdims=True) - 1.0

    zeros = np.zeros(x.shape[:-1] + (1,))
    cs1 = np.concatenate([zeros, np.cumsum(x, axis=-1)], axis=-1)
    mean = _window_sums(cs1, length) / length  # (..., 3, W)

    def cov(i: int, j: int) -> np.ndarray:
        prod = np.cumsum(x[..., i, :] * x[..., j, :], axis=-1)
        cs = np.concatenate([zeros[..., 0, :], prod], axis=-1)
        return _window_sums(cs, length) / length - mean[..., i, :] * mean[..., j, :]

    r_, g_, b_ = 0, 1, 2
    scale = 1.0 / (1.0 + mean)  # normalization by the window mean
    sr, sg, sb = scale[..., r_, :], scale[..., g_, :], scale[..., b_, :]
    c_rr, c_gg, c_bb = cov(r_, r_), cov(g_, g_), cov(b_, b_)
    c_rg, c_rb, c_gb = cov(r_, g_), cov(r_, b_), cov(g_, b_)

    # S1 = g - b, S2 = g + b - 2 r on the normalized channels
    var1 = sg * sg * c_gg + sb * sb * c_bb - 2 * sg * sb * c_gb
    var2 = (
        sg * sg * c_gg
        + sb * sb * c_bb
        + 4 * sr * sr * c_rr
        + 2 * sg * sb * c_gb
        - 4 * sr * sg * c_rg
        - 4 * sr * sb * c_rb
    )
    var1 = np.maximum(var1, 0.0)
    var2 = np.maximum(var2, 0.0)
    live = (var1 + var2) > ZERO_VARIANCE_TOL
    alpha = np.where(var2 > ZERO_VARIANCE_TOL, np.sqrt(var1 / np.where(var2 > 0, var2, 1.0)), 0.0)

    k_r = np.where(live, -2.0 * alpha * sr, 0.0)
    k_g = np.where(live, (1.0 + alpha) * sg, 0.0)
    k_b = np.where(live, (alpha - 1.0) * sb, 0.0)
    offset = k_r * mean[..., r_, :] + k_g * mean[..., g_, :] + k_b * mean[..., b_, :]

    pulse = (
        x[..., r_, :] * _spread(k_r, length, n)
        + x[..., g_, :] * _spread(k_g, length, n)
        + x[..., b_, :] * _spread(k_b, length, n)
        - _spread(offset, length, n)
    )
    pulse[~ok] = 0.0
    return pulse, ok


def pos(rgb: RgbSignal, window_s: float = DEFAULT_WINDOW_S, strict: bool = False) -> ScalarSignal:
    """POS pulse signal of one RGB trace.

    Args:
        rgb: Positive RGB intensities.
        window_s: Projection window in seconds (1.6 s by default).
        strict: Raise instead of returning zeros for a constant input.

    Raises:
        SignalTooShort: If the trace is shorter than one window.
        NonPositiveBaseline: If a channel is not strictly positive.
        ZeroVariance: In strict mode, if no window carries temporal variation.
    """
    pulse, ok = pos_array(rgb.samples.T, rgb.fs, window_s)
    if not bool(ok):
        raise NonPositiveBaseline("RGB trace must be strictly positive")
    if strict and not np.any(pulse):
        raise ZeroVariance("RGB trace is constant over every POS window")
    return ScalarSignal(pulse, rgb.fs)


def green(rgb: RgbSignal) -> ScalarSignal:
    """Mean-normalized green channel, the classic single-channel baseline extractor."""
    g = rgb.samples[:, 1]
    mean = g.mean()
    if mean <= 0:
        raise NonPositiveBaseline("Green channel must be strictly positive")
    return ScalarSignal(g / mean - 1.0, rgb.fs)


def skin_average(frames: RgbFrameSequence, mask: SkinMask) -> RgbSignal:
    """Spatial mean of the skin pixels, one RGB triple per frame."""
    if mask.values.shape != (frames.height, frames.width):
        raise EmptyMask(
            f"Mask shape {mask.values.shape} does not match frames {(frames.height, frames.width)}"
        )
    if mask.count == 0:
        raise EmptyMask("Skin mask selects no pixel")
    pixels = frames.frames[:, mask.values, :].astype(float)
    return RgbSignal(pixels.mean(axis=1), frames.fs)


def reference_signal(
    frames: RgbFrameSequence,
    mask: SkinMask,
    *,
    window_s: float = DEFAULT_WINDOW_S,
    band_hz: tuple[float, float] = (0.4, 4.0),
    hr_range_bpm: tuple[float, float] = (30.0, 200.0),
    pad_factor: int = 4,
    min_peak_ratio: float = 3.0,
    min_duration_s: float = 20.0,
) -> ReferenceBundle:
    """Whole-face reference pulse and reference heart rate of one recording.

    Raises:
        EmptyMask: If the mask is empty or mismatched.
        SignalTooShort: If fewer than ``min_duration_s`` seconds of frames are given.
        NonPositiveBaseline: For dark recordings.
        NoSpectralPeak: If the pulse has no dominant in-range peak.
    """
    if frames.duration_s + 1e-9 < min_duration_s:
        raise SignalTooShort(
            f"Reference needs {min_duration_s} s of frames, got {frames.duration_s:.2f} s"
        )
    rgb = skin_average(frames, mask)
    if np.any(rgb.samples <= 0):
        raise NonPositiveBaseline("Skin average is not strictly positive (dark frames)")
    s_ref = bandpass(pos(rgb, window_s), band_hz[0], band_hz[1])
    hilb = scale_reference(analytic(s_ref))
    hr_hz, ratio = dominant_frequency(
        power_spectrum(s_ref, pad_factor),
        bpm_to_hz(hr_range_bpm[0]),
        bpm_to_hz(hr_range_bpm[1]),
        min_peak_ratio=min_peak_ratio,
    )
    log_with_context(
        logger,
        logging.INFO,
        "Reference signal computed",
        view_id=frames.view_id,
        hr_ref_bpm=round(hz_to_bpm(hr_hz), 3),
        peak_ratio=round(ratio, 3),
        skin_pixels=mask.count,
    )
    return ReferenceBundle(s_ref=s_ref, s_ref_hilb_scaled=hilb, hr_ref_hz=hr_hz, peak_ratio=ratio)


def validate_reference(
    bundle: ReferenceBundle,
    contact_ppg: ScalarSignal,
    *,
    video_t0_s: float = 0.0,
    ppg_t0_s: float = 0.0,
    tolerance_bpm: float = 3.0,
    hr_range_bpm: tuple[float, float] = (30.0, 200.0),
    pad_factor: int = 4,
    min_overlap_s: float = 10.0,
) -> ValidationReport:
    """Compare the video reference heart rate with a contact PPG.

    The PPG is resampled to the video rate over the span both signals cover.

    Raises:
        SpanMismatch: If the signals do not overlap for ``min_overlap_s`` seconds.
    """
    fs = bundle.s_ref.fs
    t_video = video_t0_s + np.arange(len(bundle.s_ref)) / fs
    t_ppg = ppg_t0_s + np.arange(len(contact_ppg)) / contact_ppg.fs
    start, end = overlap_span(t_video, t_ppg, min_overlap_s)
    ppg = ScalarSignal(resample_uniform(t_ppg, contact_ppg.samples, fs, start, end), fs)
    hr_ppg_hz, _ = dominant_frequency(
        power_spectrum(ppg, pad_factor), bpm_to_hz(hr_range_bpm[0]), bpm_to_hz(hr_range_bpm[1])
    )
    hr_ref_bpm = hz_to_bpm(bundle.hr_ref_hz)
    hr_ppg_bpm = hz_to_bpm(hr_ppg_hz)
    diff = abs(hr_ref_bpm - hr_ppg_bpm)
    report = ValidationReport(
        hr_ref_bpm=hr_ref_bpm,
        hr_ppg_bpm=hr_ppg_bpm,
        diff_bpm=diff,
        tolerance_bpm=tolerance_bpm,
        passed=diff <= tolerance_bpm,
    )
    log_with_context(
        logger,
        logging.INFO if report.passed else logging.WARNING,
        "Reference validated against contact PPG",
        hr_ref_bpm=round(hr_ref_bpm, 3),
        hr_ppg_bpm=round(hr_ppg_bpm, 3),
        passed=report.passed,
    )
    return report

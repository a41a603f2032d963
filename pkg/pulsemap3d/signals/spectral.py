"""Spectra, dominant-frequency search and the in-band/out-of-band SNR.

Heart-rate searches use a zero-padded spectrum (``pad_factor`` times the next power of two);
the SNR uses the plain DFT of the segment so that every bin is an independent sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.errors import NoSpectralPeak, PreconditionError, ZeroSignal
from ..core.units import bpm_to_hz
from ..models import ScalarSignal, SnrWindow, Spectrum

DEFAULT_PAD_FACTOR = 4
DEFAULT_CLAMP_DB = 60.0


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def padded_length(n: int, pad_factor: int) -> int:
    if pad_factor < 1:
        raise PreconditionError(f"pad_factor must be >= 1, got: {pad_factor}")
    return int(pad_factor) * next_pow2(n)


def spectrum_array(x: np.ndarray, n_fft: int | None = None) -> np.ndarray:
    """One-sided FFT of mean-removed traces along the last axis."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=-1, keepdims=True)
    return np.fft.rfft(centered, n=n_fft or x.shape[-1], axis=-1)


def power_spectrum(s: ScalarSignal, pad_factor: int = DEFAULT_PAD_FACTOR) -> Spectrum:
    """Mean-removed, zero-padded spectrum covering [0, fs/2]."""
    n_fft = padded_length(len(s), pad_factor)
    return Spectrum(
        bins=spectrum_array(s.samples, n_fft),
        freq_resolution=s.fs / n_fft,
        fs=s.fs,
        n_fft=n_fft,
    )


def band_mask(freqs: np.ndarray, lo_hz: float, hi_hz: float) -> np.ndarray:
    return (freqs >= lo_hz) & (freqs <= hi_hz)


def dominant_frequency_array(
    power: np.ndarray, freqs: np.ndarray, lo_hz: float, hi_hz: float
) -> tuple[np.ndarray, np.ndarray]:
    """Frequency of maximal power inside ``[lo_hz, hi_hz]`` per trace.

    Returns:
        ``(peak_hz, peak_ratio)`` where ``peak_ratio`` is the peak power over the median
        in-range power (``inf`` when the median vanishes).
    """
    sel = band_mask(freqs, lo_hz, hi_hz)
    if not sel.any():
        raise PreconditionError(f"No spectral bin inside [{lo_hz}, {hi_hz}] Hz")
    in_range = power[..., sel]
    idx = np.argmax(in_range, axis=-1)
    peak = np.take_along_axis(in_range, idx[..., None], axis=-1)[..., 0]
    median = np.median(in_range, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(median > 0, peak / np.where(median > 0, median, 1.0), np.inf)
    ratio = np.where(peak > 0, ratio, 0.0)
    return freqs[sel][idx], ratio


def dominant_frequency(
    spectrum: Spectrum,
    lo_hz: float = bpm_to_hz(30.0),
    hi_hz: float = bpm_to_hz(200.0),
    min_peak_ratio: float | None = None,
) -> tuple[float, float]:
    """Spectral argmax inside the physiological range.

    Raises:
        NoSpectralPeak: If ``min_peak_ratio`` is given and the peak does not exceed it.
    """
    peak_hz, ratio = dominant_frequency_array(spectrum.power, spectrum.freqs, lo_hz, hi_hz)
    peak_hz_f, ratio_f = float(peak_hz), float(ratio)
    if min_peak_ratio is not None and not ratio_f >= min_peak_ratio:
        raise NoSpectralPeak(
            f"Peak at {peak_hz_f:.3f} Hz is {ratio_f:.2f}x the median power, need {min_peak_ratio}x"
        )
    return peak_hz_f, ratio_f


@dataclass(frozen=True)
class SnrBands:
    """Boolean bin masks of one SNR evaluation."""

    full: np.ndarray
    signal: np.ndarray

    @property
    def noise(self) -> np.ndarray:
        return self.full & ~self.signal


def snr_bands(freqs: np.ndarray, w: SnrWindow) -> SnrBands:
    """Range ``F_HR`` (heart-rate range and its first harmonic) and target mask ``U_t``.

    ``U_t`` marks bins within ``tol_fund_bpm`` of the reference rate or ``tol_harm_bpm`` of
    its first harmonic.
    """
    lo, hi = bpm_to_hz(w.range_bpm[0]), bpm_to_hz(w.range_bpm[1])
    full = band_mask(freqs, lo, hi) | band_mask(freqs, 2 * lo, 2 * hi)
    fund = np.abs(freqs - w.hr_ref_hz) <= bpm_to_hz(w.tol_fund_bpm)
    harm = np.abs(freqs - 2 * w.hr_ref_hz) <= bpm_to_hz(w.tol_harm_bpm)
    return SnrBands(full=full, signal=full & (fund | harm))


def snr_array(
    x: np.ndarray, fs: float, w: SnrWindow, clamp_db: float = DEFAULT_CLAMP_DB
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SNR in dB of each trace (time on the last axis).

    Returns:
        ``(snr_db, clamped, valid)``. Values are clipped to ``+-clamp_db`` and flagged; traces
        without energy in ``F_HR`` are invalid and carry NaN.
    """
    x = np.asarray(x, dtype=float)
    spec = spectrum_array(x)
    freqs = np.fft.rfftfreq(x.shape[-1], d=1.0 / fs)
    bands = snr_bands(freqs, w)
    power = np.abs(spec) ** 2
    num = np.sum(np.where(bands.signal, power, 0.0), axis=-1)
    den = np.sum(np.where(bands.noise, power, 0.0), axis=-1)
    valid = (num + den) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = 10.0 * np.log10(num / den)
    raw = np.where(den == 0, np.inf, raw)
    raw = np.where(num == 0, -np.inf, raw)
    clamped = valid & (np.abs(raw) > clamp_db)
    out = np.where(valid, np.clip(raw, -clamp_db, clamp_db), np.nan)
    return out, clamped, valid


@dataclass(frozen=True)
class SnrResult:
    snr_db: float
    clamped: bool


def snr_detail(s: ScalarSignal, w: SnrWindow, clamp_db: float = DEFAULT_CLAMP_DB) -> SnrResult:
    """Scalar SNR with its clamp flag.

    Raises:
        ZeroSignal: If the segment has no energy in the heart-rate range.
    """
    out, clamped, valid = snr_array(s.samples, s.fs, w, clamp_db)
    if not bool(valid):
        raise ZeroSignal("Signal has no energy in the heart-rate range")
    return SnrResult(snr_db=float(out), clamped=bool(clamped))


def snr(s: ScalarSignal, w: SnrWindow, clamp_db: float = DEFAULT_CLAMP_DB) -> float:
    return snr_detail(s, w, clamp_db).snr_db

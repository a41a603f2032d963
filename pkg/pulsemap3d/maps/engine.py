"""Sliding-window pulse maps over overlapping segments.

For every segment the frames are box-averaged over ``k x k`` pixels, each window trace goes
through POS (SNR, heart rate, POS phase) and through per-channel baseline normalization
(phase and amplitude against the reference). Segment results are then averaged; a pixel is
valid only if it was valid in every segment.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..config import AppSettings
from ..core.errors import Infeasible, LengthMismatch
from ..core.logging import get_logger, log_with_context
from ..core.orchestrator import StageRunner
from ..core.units import bpm_to_hz, hz_to_bpm
from ..models import (
    AnalyticSignal,
    MapRequest,
    PulseMapSet,
    ReferenceBundle,
    RgbFrameSequence,
    ScalarSignal,
    SkinMask,
    SnrWindow,
)
from ..signals.filtering import analytic_array, detrend_normalize_array, reference_factor
from ..signals.pos import pos_array, reference_signal
from ..signals.spectral import (
    dominant_frequency_array,
    padded_length,
    snr_array,
    spectrum_array,
)

logger = get_logger("maps.engine")

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class MapOptions:
    """Numerical parameters of the map computation (defaults match ``AppSettings``)."""

    pos_window_s: float = 1.6
    detrend_cutoff_hz: float = 0.4
    filter_order: int = 4
    pad_factor: int = 4
    hr_range_bpm: tuple[float, float] = (30.0, 200.0)
    tol_fund_bpm: float = 6.0
    tol_harm_bpm: float = 12.0
    snr_clamp_db: float = 60.0
    phase_mean: Literal["circular", "arithmetic"] = "circular"
    rows_per_block: int = 8
    workers: int = 1

    @classmethod
    def from_settings(cls, settings: AppSettings, workers: int | None = None) -> MapOptions:
        s, m = settings.signal, settings.maps
        return cls(
            pos_window_s=s.pos_window_s,
            detrend_cutoff_hz=s.detrend_cutoff_hz,
            filter_order=s.filter_order,
            pad_factor=s.pad_factor,
            hr_range_bpm=(s.hr_min_bpm, s.hr_max_bpm),
            tol_fund_bpm=m.tol_fund_bpm,
            tol_harm_bpm=m.tol_harm_bpm,
            snr_clamp_db=m.snr_clamp_db,
            phase_mean=m.phase_mean,
            rows_per_block=m.rows_per_block,
            workers=workers or settings.runtime.workers,
        )


def wrap_angle(x: np.ndarray | float) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


def segment_slices(
    total_len_s: float, segment_len_s: float, n_segments: int, fs: float
) -> list[tuple[int, int]]:
    """Frame ranges ``[start, end)`` of uniformly spaced, overlapping segments.

    The first segment starts at 0 and the last one ends at the total length; starts are
    rounded to whole frames.

    Raises:
        Infeasible: If the segments do not fit the recording.
    """
    seg = int(round(segment_len_s * fs))
    total = int(round(total_len_s * fs))
    if n_segments < 1 or seg < 1:
        raise Infeasible(f"Need at least one non-empty segment, got n={n_segments}, len={seg}")
    if total < seg:
        raise Infeasible(f"Recording of {total_len_s} s cannot hold a {segment_len_s} s segment")
    if n_segments == 1:
        return [(0, seg)]
    span = total - seg
    starts = [int(round(i * span / (n_segments - 1))) for i in range(n_segments)]
    return [(s, s + seg) for s in starts]


def phase_amplitude_array(s_hat: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle and magnitude of ``sum_t ref(t) * s_hat(t)`` along the last axis."""
    if s_hat.shape[-1] != ref.shape[-1]:
        raise LengthMismatch(f"Signal length {s_hat.shape[-1]} != reference length {ref.shape[-1]}")
    # elementwise product then sum keeps the reduction order independent of the batch size
    z = (s_hat * ref).sum(axis=-1)
    return wrap_angle(np.angle(z)), np.abs(z)


def phase_amplitude(s_c_hat: ScalarSignal, ref: AnalyticSignal) -> tuple[float, float]:
    """Phase and amplitude of a normalized channel against the scaled analytic reference.

    Raises:
        LengthMismatch: If the signals have different lengths.
    """
    phase, amp = phase_amplitude_array(s_c_hat.samples, ref.samples)
    return float(phase), float(amp)


@dataclass(frozen=True)
class _SegmentReference:
    start: int
    end: int
    hilb: np.ndarray
    ref_angle: float
    ref_bin: int


def _segment_reference(
    ref: ReferenceBundle, h_full: np.ndarray, start: int, end: int, n_fft: int
) -> _SegmentReference:
    # phase stays relative to the unrotated reference waveform, only the magnitude is scaled
    seg = h_full[start:end]
    alpha = reference_factor(AnalyticSignal(seg, ref.s_ref.fs))
    hilb = abs(alpha) * seg
    spec = spectrum_array(ref.s_ref.samples[start:end], n_fft)
    ref_bin = int(round(ref.hr_ref_hz * n_fft / ref.s_ref.fs))
    return _SegmentReference(start, end, hilb, float(np.angle(spec[ref_bin])), ref_bin)


@dataclass
class _BlockResult:
    rows: tuple[int, int]
    snr: np.ndarray
    hr: np.ndarray
    phase_pos: np.ndarray
    phase_c: np.ndarray
    amp_c: np.ndarray
    valid: np.ndarray
    clamped: np.ndarray
    failures: dict[str, int]


def box_average(chunk: np.ndarray, k: int) -> np.ndarray:
    """Mean over ``k x k`` windows of frames ``(T, H, W, C)``; output ``(T, H-k+1, W-k+1, C)``."""
    rows = sliding_window_view(chunk, k, axis=1).sum(axis=-1)
    both = sliding_window_view(rows, k, axis=2).sum(axis=-1)
    return both / float(k * k)


class _MapWorker:
    def __init__(
        self,
        frames: np.ndarray,
        fs: float,
        k: int,
        hr_ref_hz: float,
        segments: list[_SegmentReference],
        options: MapOptions,
    ) -> None:
        self.frames = frames
        self.fs = fs
        self.k = k
        self.half = k // 2
        self.segments = segments
        self.options = options
        self.window = SnrWindow(
            hr_ref_hz=hr_ref_hz,
            tol_fund_bpm=options.tol_fund_bpm,
            tol_harm_bpm=options.tol_harm_bpm,
            range_bpm=options.hr_range_bpm,
        )

    def __call__(self, rows: tuple[int, int]) -> _BlockResult:
        c0, c1 = rows
        h, k, opts = self.half, self.k, self.options
        width = self.frames.shape[2] - 2 * h
        shape = (c1 - c0, width)
        n_seg = len(self.segments)

        snr_sum = np.zeros(shape)
        hr_sum = np.zeros(shape)
        amp_sum = np.zeros((3, *shape))
        pos_acc = np.zeros(shape, dtype=complex)
        ch_acc = np.zeros((3, *shape), dtype=complex)
        valid = np.ones(shape, dtype=bool)
        clamped = np.zeros(shape, dtype=bool)
        failures = {"NonPositiveBaseline": 0, "ZeroSignal": 0, "NonFinite": 0}

        lo_hz, hi_hz = bpm_to_hz(opts.hr_range_bpm[0]), bpm_to_hz(opts.hr_range_bpm[1])
        for seg in self.segments:
            chunk = np.asarray(self.frames[seg.start : seg.end, c0 - h : c1 + h], dtype=float)
            n = chunk.shape[0]
            box = box_average(chunk, k)  # (n, rows, width, 3)
            traces = box.transpose(1, 2, 3, 0).reshape(-1, 3, n)

            pulse, pos_ok = pos_array(traces, self.fs, opts.pos_window_s)
            snr_db, snr_clamped, snr_ok = snr_array(pulse, self.fs, self.window, opts.snr_clamp_db)

            n_fft = padded_length(n, opts.pad_factor)
            spec = spectrum_array(pulse, n_fft)
            freqs = np.fft.rfftfreq(n_fft, d=1.0 / self.fs)
            hr_hz, _ = dominant_frequency_array(np.abs(spec) ** 2, freqs, lo_hz, hi_hz)
            phase_pos = wrap_angle(seg.ref_angle - np.angle(spec[:, seg.ref_bin]))

            s_hat, dn_ok = detrend_normalize_array(
                traces, self.fs, opts.detrend_cutoff_hz, opts.filter_order
            )
            phase_c, amp_c = phase_amplitude_array(np.nan_to_num(s_hat), seg.hilb)

            finite = np.isfinite(snr_db) & np.isfinite(amp_c).all(axis=-1)
            seg_valid = pos_ok & snr_ok & dn_ok.all(axis=-1) & finite
            failures["NonPositiveBaseline"] += int((~(pos_ok & dn_ok.all(axis=-1))).sum())
            failures["ZeroSignal"] += int((pos_ok & ~snr_ok).sum())
            failures["NonFinite"] += int((pos_ok & snr_ok & ~finite).sum())

            valid &= seg_valid.reshape(shape)
            clamped |= snr_clamped.reshape(shape)
            snr_sum += np.nan_to_num(snr_db).reshape(shape)
            hr_sum += hr_hz.reshape(shape)
            amp_sum += np.nan_to_num(amp_c).T.reshape(3, *shape)
            if opts.phase_mean == "circular":
                pos_acc += np.exp(1j * phase_pos).reshape(shape)
                ch_acc += np.exp(1j * phase_c).T.reshape(3, *shape)
            else:
                pos_acc += phase_pos.reshape(shape)
                ch_acc += phase_c.T.reshape(3, *shape)

        if opts.phase_mean == "circular":
            phase_pos_mean = wrap_angle(np.angle(pos_acc))
            phase_c_mean = wrap_angle(np.angle(ch_acc))
        else:
            phase_pos_mean = wrap_angle(pos_acc.real / n_seg)
            phase_c_mean = wrap_angle(ch_acc.real / n_seg)

        return _BlockResult(
            rows=rows,
            snr=snr_sum / n_seg,
            hr=hr_sum / n_seg,
            phase_pos=phase_pos_mean,
            phase_c=phase_c_mean,
            amp_c=amp_sum / n_seg,
            valid=valid,
            clamped=clamped & valid,
            failures=failures,
        )


def _row_blocks(height: int, half: int, rows_per_block: int) -> list[tuple[int, int]]:
    return [
        (r, min(r + rows_per_block, height - half))
        for r in range(half, height - half, rows_per_block)
    ]


def _empty_maps(height: int, width: int, k: int, view_id: int) -> PulseMapSet:
    nan2 = np.full((height, width), np.nan)
    nan3 = np.full((3, height, width), np.nan)
    return PulseMapSet(
        snr_db=nan2.copy(),
        phase_pos_rad=nan2.copy(),
        hr_hz=nan2.copy(),
        phase_c_rad=nan3.copy(),
        amp_c=nan3.copy(),
        valid=np.zeros((height, width), dtype=bool),
        k=k,
        view_id=view_id,
        snr_clamped=np.zeros((height, width), dtype=bool),
    )


def window_maps(
    frames: RgbFrameSequence,
    req: MapRequest,
    ref: ReferenceBundle,
    options: MapOptions | None = None,
) -> PulseMapSet:
    """Compute the averaged pulse maps of one view.

    Per-pixel failures (dark pixels, zero signal) only invalidate that pixel; the
    ``floor(k/2)`` border is always invalid.

    Raises:
        Infeasible: If the frames or the reference do not cover ``req.total_len_s``.
    """
    opts = options or MapOptions()
    fs = frames.fs
    n_total = int(round(req.total_len_s * fs))
    if frames.n_frames < n_total or len(ref.s_ref) < n_total:
        raise Infeasible(
            f"Need {n_total} frames for {req.total_len_s} s, have {frames.n_frames} frames and "
            f"a reference of {len(ref.s_ref)} samples"
        )
    slices = segment_slices(req.total_len_s, req.segment_len_s, req.n_segments, fs)
    height, width = frames.height, frames.width
    result = _empty_maps(height, width, req.k, frames.view_id)
    half = req.k // 2
    if height < req.k or width < req.k:
        return result

    started = time.perf_counter()
    n_fft = padded_length(slices[0][1] - slices[0][0], opts.pad_factor)
    h_full = analytic_array(ref.s_ref.samples)
    segments = [_segment_reference(ref, h_full, s, e, n_fft) for s, e in slices]
    worker = _MapWorker(frames.frames, fs, req.k, ref.hr_ref_hz, segments, opts)
    runner: StageRunner[tuple[int, int], _BlockResult] = StageRunner(
        worker, workers=opts.workers, max_retries=0, name="window_maps"
    )
    blocks = runner.map(_row_blocks(height, half, opts.rows_per_block))

    cols = slice(half, width - half)
    failures: dict[str, int] = {}
    for blk in blocks:
        rows = slice(*blk.rows)
        v = blk.valid
        result.valid[rows, cols] = v
        result.snr_db[rows, cols] = np.where(v, blk.snr, np.nan)
        result.hr_hz[rows, cols] = np.where(v, blk.hr, np.nan)
        result.phase_pos_rad[rows, cols] = np.where(v, blk.phase_pos, np.nan)
        result.phase_c_rad[:, rows, cols] = np.where(v, blk.phase_c, np.nan)
        result.amp_c[:, rows, cols] = np.where(v, blk.amp_c, np.nan)
        assert result.snr_clamped is not None
        result.snr_clamped[rows, cols] = blk.clamped
        for kind, count in blk.failures.items():
            failures[kind] = failures.get(kind, 0) + count

    log_with_context(
        logger,
        logging.INFO,
        "Pulse maps computed",
        view_id=frames.view_id,
        k=req.k,
        segments=len(slices),
        valid_fraction=round(float(result.valid.mean()), 4),
        failures={k: v for k, v in failures.items() if v},
        elapsed_s=round(time.perf_counter() - started, 3),
    )
    return result


def compute_view_maps(
    frames: RgbFrameSequence,
    mask: SkinMask,
    req: MapRequest,
    options: MapOptions | None = None,
    *,
    band_hz: tuple[float, float] = (0.4, 4.0),
    min_peak_ratio: float = 3.0,
) -> tuple[ReferenceBundle, PulseMapSet]:
    """Reference signal over ``req.total_len_s`` followed by :func:`window_maps`."""
    opts = options or MapOptions()
    n_total = int(round(req.total_len_s * frames.fs))
    if frames.n_frames < n_total:
        raise Infeasible(f"Need {n_total} frames, have {frames.n_frames}")
    head = RgbFrameSequence(frames.frames[:n_total], frames.fs, frames.view_id)
    ref = reference_signal(
        head,
        mask,
        window_s=opts.pos_window_s,
        band_hz=band_hz,
        hr_range_bpm=opts.hr_range_bpm,
        pad_factor=opts.pad_factor,
        min_peak_ratio=min_peak_ratio,
        min_duration_s=min(20.0, req.total_len_s),
    )
    return ref, window_maps(head, req, ref, opts)


def diffuse_map(frames: RgbFrameSequence) -> np.ndarray:
    """Temporal mean luminance per pixel, the diffuse-texture analogue of a view."""
    mean_rgb = np.asarray(frames.frames, dtype=float).mean(axis=0)
    return mean_rgb @ LUMA_WEIGHTS


def map_summary(maps: PulseMapSet) -> dict[str, float]:
    """Valid fraction, median SNR (dB) and median heart rate (BPM) over valid pixels."""
    v = maps.valid
    if not v.any():
        return {"valid_fraction": 0.0, "median_snr_db": float("nan"), "median_hr_bpm": float("nan")}
    return {
        "valid_fraction": float(v.mean()),
        "median_snr_db": float(np.median(maps.snr_db[v])),
        "median_hr_bpm": hz_to_bpm(float(np.median(maps.hr_hz[v]))),
    }

"""Frame rendering for synthetic scenarios.

Channel ``c`` of a surface pixel at time ``t`` is::

    L * rho_c * (1 + a * kappa_c * sin(2 pi f t - phi)) + specular(t) + noise

with ``L`` the illumination, ``rho`` the skin colour, ``kappa`` the per-channel pulsatile
strength and ``a``/``phi`` the ground-truth textures sampled at the nearest texel. Noise for
frame ``k`` of view ``v`` is drawn from ``default_rng([seed, v, k])`` so any frame can be
re-rendered on its own.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import overload

import numpy as np

from ..config import SynthScenarioConfig
from ..core.errors import InvalidScenario
from ..core.logging import get_logger, log_with_context
from ..data_adapters.csv_adapter import PpgRecording
from ..geometry.raster import RasterResult, rasterize
from ..geometry.texture import pixel_uvs, sample_texture
from ..models import CameraParams, RgbFrameSequence, ScalarSignal, SkinMask
from .scenario import SynthScenario

logger = get_logger("synth.render")

KAPPA = np.array([0.33, 0.77, 0.53])
SKIN_RGB = np.array([0.72, 0.52, 0.42])
BACKGROUND = 0.02
SNR_PROXY_CLAMP_DB = 60.0
LANDMARK_DEPTH_TOL_MM = 2.0
_SPECULAR_STREAM = 1_000_003


@dataclass(frozen=True)
class Highlight:
    center_px: tuple[float, float]
    sigma_px: float
    strength: float
    drift: float = 0.0
    drift_hz: float = 0.0

    def blob(self, height: int, width: int) -> np.ndarray:
        ys, xs = np.mgrid[0:height, 0:width].astype(float)
        cx, cy = self.center_px
        return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * self.sigma_px**2))

    def gain(self, t: float) -> float:
        return self.strength * (1.0 + self.drift * np.sin(2 * np.pi * self.drift_hz * t))


@dataclass(frozen=True)
class ViewGeometry:
    """Time-independent per-pixel quantities of one view."""

    camera: CameraParams
    raster: RasterResult
    hit: np.ndarray
    mask: np.ndarray
    light: np.ndarray
    amplitude: np.ndarray
    phase: np.ndarray
    highlights: tuple[Highlight, ...] = ()

    @property
    def base(self) -> np.ndarray:
        """Static RGB intensity ``(H, W, 3)``."""
        b = self.light[..., None] * SKIN_RGB
        return np.where(self.hit[..., None], b, BACKGROUND)

    @cached_property
    def specular_blobs(self) -> list[tuple[Highlight, np.ndarray]]:
        h, w = self.hit.shape
        return [(hl, np.where(self.hit, hl.blob(h, w), 0.0)) for hl in self.highlights]


def light_field(sc: SynthScenario, cam: CameraParams, raster: RasterResult) -> np.ndarray:
    """Illumination ``L`` per pixel, zero where no surface is hit.

    Diffuse light is uniform. A ring light sits at the camera centre:
    ``L = intensity * max(cos, 0) * (r0 / r) ** p`` with ``r`` the distance to the camera and
    ``cos`` taken between the face normal and the direction towards the camera.
    """
    light = sc.config.light
    hit = raster.hit
    out = np.zeros(hit.shape)
    if light.kind == "diffuse":
        out[hit] = light.intensity
        return out
    points = raster.surface_points(sc.mesh)[hit]
    to_cam = cam.center - points
    r = np.linalg.norm(to_cam, axis=1)
    normals = sc.mesh.face_normals()[raster.face_id[hit]]
    cos = np.einsum("nd,nd->n", normals, to_cam) / r
    out[hit] = light.intensity * np.maximum(cos, 0.0) * (light.r0_mm / r) ** light.falloff_exponent
    return out


def _highlights(
    sc: SynthScenario, view_id: int, mask: np.ndarray, seed: int
) -> tuple[Highlight, ...]:
    out = [
        Highlight(s.center_px, s.sigma_px, s.strength, s.drift, s.drift_hz)
        for s in sc.config.specular
        if s.view_id == view_id
    ]
    auto = sc.config.auto_specular
    if auto is not None and mask.any():
        rng = np.random.default_rng([seed, _SPECULAR_STREAM, view_id])
        rows, cols = np.nonzero(mask)
        k = int(rng.integers(len(rows)))
        out.append(
            Highlight(
                (float(cols[k]), float(rows[k])),
                auto.sigma_px,
                auto.strength,
                auto.drift,
                auto.drift_hz,
            )
        )
    return tuple(out)


def view_geometry(sc: SynthScenario, view_id: int, seed: int = 0) -> ViewGeometry:
    cam = sc.cameras[view_id]
    raster = rasterize(sc.mesh, cam)
    hit = raster.hit
    mask = hit & sc.skin_faces[np.maximum(raster.face_id, 0)]
    uv = pixel_uvs(sc.mesh, raster)
    amp = sample_texture(sc.amp_texture, uv, mode="nearest")
    phase = sample_texture(sc.phase_texture, uv, mode="nearest")
    return ViewGeometry(
        camera=cam,
        raster=raster,
        hit=hit,
        mask=mask,
        light=light_field(sc, cam, raster),
        amplitude=np.where(hit, amp, 0.0),
        phase=np.where(hit, phase, 0.0),
        highlights=_highlights(sc, view_id, mask, seed),
    )


def render_frame(
    sc: SynthScenario, geo: ViewGeometry, index: int, seed: int, base: np.ndarray | None = None
) -> np.ndarray:
    """One float RGB frame ``(H, W, 3)``; bit-identical for equal inputs."""
    t = index / sc.config.fps
    base = geo.base if base is None else base
    pulse = np.sin(2 * np.pi * sc.hr_hz * t - geo.phase)
    frame = base * (1.0 + geo.amplitude[..., None] * KAPPA * pulse[..., None])
    for hl, blob in geo.specular_blobs:
        frame = frame + (hl.gain(t) * blob)[..., None]
    sigma = sc.config.noise_sigma
    if sigma > 0:
        rng = np.random.default_rng([seed, geo.camera.view_id, index])
        noise = rng.standard_normal(frame.shape)
        if sc.config.noise_model == "shot":
            noise *= np.sqrt(np.maximum(frame, 0.0))
        frame = frame + sigma * noise
    return frame


def render_view(sc: SynthScenario, view_id: int, seed: int = 0) -> RgbFrameSequence:
    started = time.perf_counter()
    geo = view_geometry(sc, view_id, seed)
    base = geo.base
    h, w = geo.hit.shape
    frames = np.empty((sc.n_frames, h, w, 3), dtype=np.float32)
    for k in range(sc.n_frames):
        frames[k] = render_frame(sc, geo, k, seed, base)
    log_with_context(
        logger,
        logging.DEBUG,
        "View rendered",
        view_id=view_id,
        frames=sc.n_frames,
        skin_pixels=int(geo.mask.sum()),
        runtime_s=round(time.perf_counter() - started, 3),
    )
    return RgbFrameSequence(frames, sc.config.fps, view_id)


class RenderedViews(Sequence[RgbFrameSequence]):
    """Views rendered on access, so only one frame stack is alive at a time."""

    def __init__(self, sc: SynthScenario, seed: int) -> None:
        self._sc = sc
        self._seed = seed

    def __len__(self) -> int:
        return len(self._sc.cameras)

    @overload
    def __getitem__(self, index: int) -> RgbFrameSequence: ...

    @overload
    def __getitem__(self, index: slice) -> list[RgbFrameSequence]: ...

    def __getitem__(self, index: int | slice) -> RgbFrameSequence | list[RgbFrameSequence]:
        if isinstance(index, slice):
            return [self[i] for i in range(len(self))[index]]
        if index < 0:
            index += len(self)
        if not 0 <= index < len(self):
            raise IndexError(index)
        return render_view(self._sc, index, self._seed)

    def __iter__(self) -> Iterator[RgbFrameSequence]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class GroundTruthBundle:
    """Everything the renderer injected, per view and in texture space.

    ``view_maps[v]`` holds ``gt_amp``, ``gt_phase_pos``, ``gt_hr`` and ``gt_snr`` (an in-band
    SNR proxy in dB); pixels without surface are NaN. Phases are defined relative to the
    injected waveform. Recovered phases are measured against the whole-face reference, which
    carries the injected phase when the scene is uniform and its spatial average otherwise.
    """

    scenario: SynthScenario
    seed: int
    view_maps: dict[int, dict[str, np.ndarray]]
    masks: dict[int, SkinMask]
    waveform: ScalarSignal
    ppg: PpgRecording
    landmarks_2d: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def hr_hz(self) -> float:
        return self.scenario.hr_hz

    @property
    def textures(self) -> dict[str, np.ndarray]:
        return {
            "gt_amp": self.scenario.amp_texture,
            "gt_phase_pos": self.scenario.phase_texture,
            "gt_snr": snr_texture(self.scenario),
        }


def _snr_db(
    amplitude: np.ndarray, light: np.ndarray, config: SynthScenarioConfig
) -> np.ndarray:
    b_g = light * SKIN_RGB[1]
    signal = amplitude * KAPPA[1] * b_g
    sigma = config.noise_sigma
    if config.noise_model == "shot":
        noise = sigma * np.sqrt(np.maximum(b_g, 0.0))
    else:
        noise = np.full(b_g.shape, sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        db = 20.0 * np.log10(signal / noise)
    db = np.where(np.isnan(db), -SNR_PROXY_CLAMP_DB, db)
    return np.clip(db, -SNR_PROXY_CLAMP_DB, SNR_PROXY_CLAMP_DB)


def snr_proxy(geo: ViewGeometry, sc: SynthScenario) -> np.ndarray:
    """``20 log10(a * kappa_g * B_g / sigma_pixel)`` clamped to +-60 dB, NaN off-surface."""
    return np.where(geo.hit, _snr_db(geo.amplitude, geo.light, sc.config), np.nan)


def snr_texture(sc: SynthScenario) -> np.ndarray:
    """SNR proxy over the amplitude texture under the configured light intensity.

    Texels without amplitude are NaN.
    """
    amp = sc.amp_texture
    light = np.full(amp.shape, sc.config.light.intensity)
    return np.where(np.isfinite(amp), _snr_db(amp, light, sc.config), np.nan)


def project_landmarks(points: np.ndarray, geo: ViewGeometry) -> np.ndarray:
    """Pixel positions of visible 3D landmarks; occluded or off-image ones are NaN."""
    cam = geo.camera
    xy, z = cam.project(points)
    out = np.full(xy.shape, np.nan)
    for i, ((x, y), depth) in enumerate(zip(xy, z)):
        if not (np.isfinite(x) and np.isfinite(y) and depth > 0):
            continue
        col, row = int(round(x)), int(round(y))
        if not (0 <= row < cam.height and 0 <= col < cam.width):
            continue
        if abs(geo.raster.depth[row, col] - depth) <= LANDMARK_DEPTH_TOL_MM:
            out[i] = (x, y)
    return out


def synthesize_ppg(sc: SynthScenario) -> PpgRecording:
    """Contact PPG over the video span: fundamental plus a weaker second harmonic."""
    cfg = sc.config
    n = int(round(cfg.duration_s * cfg.ppg_fs))
    t = np.arange(n) / cfg.ppg_fs
    f = sc.hr_hz
    values = 1.0 + np.sin(2 * np.pi * f * t) + 0.3 * np.sin(4 * np.pi * f * t + 0.4)
    return PpgRecording(t_unix_s=cfg.t0_unix_s + t, values=values)


def render_scenario(sc: SynthScenario, seed: int) -> tuple[RenderedViews, GroundTruthBundle]:
    """Lazy frame stacks for every view plus the ground truth they were rendered from.

    Raises:
        InvalidScenario: On a negative seed or a rig in which no view sees any skin.
    """
    if seed < 0:
        raise InvalidScenario(f"Seed must be non-negative, got: {seed}")
    view_maps: dict[int, dict[str, np.ndarray]] = {}
    masks: dict[int, SkinMask] = {}
    landmarks: dict[int, np.ndarray] = {}
    for cam in sc.cameras:
        geo = view_geometry(sc, cam.view_id, seed)
        nan = np.full(geo.hit.shape, np.nan)
        view_maps[cam.view_id] = {
            "gt_amp": np.where(geo.hit, geo.amplitude, nan),
            "gt_phase_pos": np.where(geo.hit, geo.phase, nan),
            "gt_hr": np.where(geo.hit, sc.hr_hz, nan),
            "gt_snr": snr_proxy(geo, sc),
        }
        masks[cam.view_id] = SkinMask(geo.mask)
        if sc.landmark_points is not None:
            landmarks[cam.view_id] = project_landmarks(sc.landmark_points, geo)
    if not any(m.values.any() for m in masks.values()):
        raise InvalidScenario("No view sees any skin")

    t = np.arange(sc.n_frames) / sc.config.fps
    bundle = GroundTruthBundle(
        scenario=sc,
        seed=seed,
        view_maps=view_maps,
        masks=masks,
        waveform=ScalarSignal(np.sin(2 * np.pi * sc.hr_hz * t), sc.config.fps),
        ppg=synthesize_ppg(sc),
        landmarks_2d=landmarks,
    )
    log_with_context(
        logger,
        logging.INFO,
        "Scenario prepared",
        geometry=sc.config.geometry,
        views=len(sc.cameras),
        frames=sc.n_frames,
        hr_bpm=sc.config.hr_bpm,
        seed=seed,
    )
    return RenderedViews(sc, seed), bundle

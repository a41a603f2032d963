"""Synthetic scenes with known perfusion textures.

A scenario fixes the geometry, the camera arc and two ground-truth textures over the mesh's
UV space: the relative pulse amplitude ``a(u, v)`` and the phase lag ``phi(u, v)`` (radians,
wrapped into (-pi, pi]). Patches (phase inversion, perfusion perturbations) are applied in
UV space so that every view sees the same surface region.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from pydantic import ValidationError

from ..config import DiskConfig, PerturbationConfig, SynthScenarioConfig
from ..core.errors import InvalidScenario
from ..geometry.camera import arc_cameras
from ..geometry.mesh import ellipsoid_mesh, plane_mesh
from ..geometry.texture import texel_centers
from ..maps.engine import wrap_angle
from ..models import CameraParams, MorphableModel, TriMesh
from ..morph.generic import build_generic_head_model, skin_region
from ..morph.model import model_mesh, shaped_vertices

PLANE_SIZE_MM = (200.0, 160.0)
SPHERE_RADIUS_MM = 90.0
NECK_DISK = DiskConfig(center_uv=(0.5, 0.25), radius_uv=0.06)
PERTURBATION_GAIN = {"scratch-boost": 2.0, "blemish-drop": 0.2}


def subject_beta(n_beta: int) -> np.ndarray:
    """Fixed, non-zero shape coefficients of the oracle subject."""
    i = np.arange(n_beta)
    return 0.8 * (-1.0) ** i / (i + 1.0)


@dataclass(frozen=True)
class SynthScenario:
    config: SynthScenarioConfig
    mesh: TriMesh
    cameras: list[CameraParams]
    amp_texture: np.ndarray
    phase_texture: np.ndarray
    skin_faces: np.ndarray
    model: MorphableModel | None = None
    landmark_points: np.ndarray | None = None

    @property
    def hr_hz(self) -> float:
        return self.config.hr_bpm / 60.0

    @property
    def n_frames(self) -> int:
        return int(round(self.config.duration_s * self.config.fps))


def _disk(uv: np.ndarray, disk: DiskConfig) -> np.ndarray:
    d = np.linalg.norm(uv - np.asarray(disk.center_uv), axis=-1)
    return d < disk.radius_uv


def gt_textures(config: SynthScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase texel grids described by ``config``."""
    uv = texel_centers(config.texture_resolution)
    u = uv[..., 0]
    if config.amplitude_pattern == "gradient":
        amp = config.amplitude * (0.5 + u)
    else:
        amp = np.full(u.shape, config.amplitude)
    if config.phase_pattern == "split":
        phase = np.where(u >= 0.5, config.phase_max_rad, 0.0)
    elif config.phase_pattern == "gradient":
        phase = config.phase_max_rad * (2.0 * u - 1.0)
    else:
        phase = np.zeros(u.shape)

    for p in config.perturbations:
        amp = np.where(_disk(uv, p), amp * PERTURBATION_GAIN[p.kind], amp)
    if config.inversion is not None:
        phase = np.where(_disk(uv, config.inversion), phase + np.pi, phase)
    return amp, wrap_angle(phase)


def _geometry(
    config: SynthScenarioConfig,
) -> tuple[TriMesh, np.ndarray, MorphableModel | None, np.ndarray | None]:
    if config.geometry == "plane":
        mesh = plane_mesh(*PLANE_SIZE_MM, nx=16, ny=16)
        return mesh, np.ones(mesh.n_faces, dtype=bool), None, None
    if config.geometry == "sphere":
        r = SPHERE_RADIUS_MM
        mesh = ellipsoid_mesh((r, r, r), n_lat=24, n_lon=32)
        return mesh, np.ones(mesh.n_faces, dtype=bool), None, None

    model = build_generic_head_model()
    vertices = shaped_vertices(model, subject_beta(model.n_beta), np.zeros(model.n_psi))
    mesh = model_mesh(model, vertices)
    skin_v = skin_region(model, vertices)
    skin_faces = skin_v[mesh.faces].all(axis=1)
    return mesh, skin_faces, model, vertices[model.landmark_vertex_ids]


def build_scenario(config: SynthScenarioConfig) -> SynthScenario:
    """Instantiate geometry, cameras and ground-truth textures.

    Raises:
        InvalidScenario: If a specular highlight names a view outside the rig.
    """
    for spec in config.specular:
        if not 0 <= spec.view_id < config.n_views:
            raise InvalidScenario(f"Specular highlight on unknown view {spec.view_id}")
    mesh, skin_faces, model, landmarks = _geometry(config)
    cams = arc_cameras(
        config.n_views,
        config.view_step_deg,
        config.camera_distance_mm,
        config.focal_px,
        config.width,
        config.height,
    )
    amp, phase = gt_textures(config)
    return SynthScenario(
        config=config,
        mesh=mesh,
        cameras=cams,
        amp_texture=amp,
        phase_texture=phase,
        skin_faces=skin_faces,
        model=model,
        landmark_points=landmarks,
    )


def load_scenario(data: dict[str, object]) -> SynthScenario:
    """Validate a JSON scenario and build it; schema errors become ``InvalidScenario``."""
    try:
        config = SynthScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidScenario(str(e)) from e
    return build_scenario(config)


def _with_config(sc: SynthScenario, config: SynthScenarioConfig) -> SynthScenario:
    amp, phase = gt_textures(config)
    return replace(sc, config=config, amp_texture=amp, phase_texture=phase)


def neck_inversion_patch(sc: SynthScenario, disk: DiskConfig | None = None) -> SynthScenario:
    """Invert the modulation sign inside a UV disk (front of the neck by default)."""
    disk = disk or NECK_DISK
    return _with_config(sc, sc.config.model_copy(update={"inversion": disk}))


def perturbation_patch(
    sc: SynthScenario,
    kind: str,
    center_uv: tuple[float, float] = (0.5, 0.5),
    radius_uv: float = 0.06,
) -> SynthScenario:
    """Scale the local amplitude by 2.0 (``scratch-boost``) or 0.2 (``blemish-drop``).

    A zero radius leaves the textures unchanged.
    """
    try:
        patch = PerturbationConfig.model_validate(
            {"kind": kind, "center_uv": center_uv, "radius_uv": radius_uv}
        )
    except ValidationError as e:
        raise InvalidScenario(str(e)) from e
    update = {"perturbations": [*sc.config.perturbations, patch]}
    return _with_config(sc, sc.config.model_copy(update=update))

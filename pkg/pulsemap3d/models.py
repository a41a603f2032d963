"""Domain types shared by the signal, map, geometry and fitting layers.

All arrays are numpy arrays; containers are frozen dataclasses that validate their invariants
on construction. Frequencies are stored in Hz, lengths in millimetres.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .core.errors import DimensionMismatch, PreconditionError

CHANNELS = ("r", "g", "b")
ALLOWED_K = (3, 5, 7, 9, 13, 17)

MAP_SEMANTICS = (
    "snr",
    "phase_pos",
    "hr",
    "phase_r",
    "phase_g",
    "phase_b",
    "amp_r",
    "amp_g",
    "amp_b",
)
PHASE_SEMANTICS = frozenset({"phase_pos", "phase_r", "phase_g", "phase_b"})
MAP_UNITS = {
    "snr": "dB",
    "phase_pos": "rad",
    "hr": "Hz",
    "phase_r": "rad",
    "phase_g": "rad",
    "phase_b": "rad",
    "amp_r": "1",
    "amp_g": "1",
    "amp_b": "1",
    "diffuse": "1",
}


def is_phase_semantic(semantic: str) -> bool:
    """True for semantics stored as angles (``gt_`` prefixes included)."""
    return semantic.removeprefix("gt_") in PHASE_SEMANTICS


def _as_float_array(values: object, name: str, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise PreconditionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ScalarSignal:
    """Uniformly sampled real signal.

    Attributes:
        samples: 1-D real samples.
        fs: Sample rate in Hz.
    """

    samples: np.ndarray
    fs: float

    def __post_init__(self) -> None:
        arr = _as_float_array(self.samples, "samples", ndim=1)
        if self.fs <= 0:
            raise PreconditionError(f"Sample rate must be positive, got: {self.fs}")
        if arr.size < 2:
            raise PreconditionError("Signal needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("Signal contains non-finite samples")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.fs

    def scaled(self, factor: float) -> ScalarSignal:
        return ScalarSignal(self.samples * factor, self.fs)

    def slice(self, start: int, end: int) -> ScalarSignal:
        return ScalarSignal(self.samples[start:end], self.fs)


@dataclass(frozen=True)
class RgbSignal:
    """Time series of (r, g, b) triples, shape ``(N, 3)``."""

    samples: np.ndarray
    fs: float

    def __post_init__(self) -> None:
        arr = _as_float_array(self.samples, "samples", ndim=2)
        if arr.shape[1] != 3:
            raise PreconditionError(f"RGB samples must have shape (N, 3), got {arr.shape}")
        if self.fs <= 0:
            raise PreconditionError(f"Sample rate must be positive, got: {self.fs}")
        if arr.shape[0] < 2:
            raise PreconditionError("Signal needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("Signal contains non-finite samples")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def channel(self, c: int | str) -> ScalarSignal:
        idx = CHANNELS.index(c) if isinstance(c, str) else int(c)
        return ScalarSignal(self.samples[:, idx], self.fs)


@dataclass(frozen=True)
class AnalyticSignal:
    """Complex analytic signal sharing the sample grid of its real source."""

    samples: np.ndarray
    fs: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim != 1 or arr.size < 2:
            raise PreconditionError("Analytic signal must be 1-D with at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("Analytic signal contains non-finite samples")
        if self.fs <= 0:
            raise PreconditionError(f"Sample rate must be positive, got: {self.fs}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def real(self) -> ScalarSignal:
        return ScalarSignal(self.samples.real, self.fs)

    def slice(self, start: int, end: int) -> AnalyticSignal:
        return AnalyticSignal(self.samples[start:end], self.fs)


@dataclass(frozen=True)
class Spectrum:
    """One-sided FFT of a real signal; bin ``i`` sits at ``i * freq_resolution`` Hz."""

    bins: np.ndarray
    freq_resolution: float
    fs: float
    n_fft: int

    def __post_init__(self) -> None:
        if self.freq_resolution <= 0:
            raise PreconditionError("Frequency resolution must be positive")

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.bins.size) * self.freq_resolution

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.bins) ** 2

    def bin_of(self, freq_hz: float) -> int:
        return int(np.clip(round(freq_hz / self.freq_resolution), 0, self.bins.size - 1))


@dataclass(frozen=True)
class RgbFrameSequence:
    """Time-ordered RGB frames, shape ``(T, H, W, 3)``, raw sensor units."""

    frames: np.ndarray
    fs: float
    view_id: int = 0

    def __post_init__(self) -> None:
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise PreconditionError(f"Frames must have shape (T, H, W, 3), got {self.frames.shape}")
        if self.fs <= 0:
            raise PreconditionError(f"Frame rate must be positive, got: {self.fs}")

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fs

    def scaled(self, factor: float) -> RgbFrameSequence:
        return replace(self, frames=self.frames.astype(float) * factor)


@dataclass(frozen=True)
class SkinMask:
    """Boolean skin segmentation of one view, shape ``(H, W)``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=bool)
        if arr.ndim != 2:
            raise PreconditionError(f"Mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def count(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class ReferenceBundle:
    """Whole-face reference pulse of one recording.

    Attributes:
        s_ref: POS output of the skin-averaged RGB signal, bandpassed 0.4-4 Hz.
        s_ref_hilb_scaled: Analytic reference scaled so that sum(Re{h} * h) == 1.
        hr_ref_hz: Spectral peak of ``s_ref`` inside the physiological range.
        peak_ratio: Peak power over median in-range power.
    """

    s_ref: ScalarSignal
    s_ref_hilb_scaled: AnalyticSignal
    hr_ref_hz: float
    peak_ratio: float = float("nan")


@dataclass(frozen=True)
class ValidationReport:
    hr_ref_bpm: float
    hr_ppg_bpm: float
    diff_bpm: float
    tolerance_bpm: float
    passed: bool


@dataclass(frozen=True)
class SnrWindow:
    """Signal and noise bands around the reference heart rate (tolerances in BPM)."""

    hr_ref_hz: float
    tol_fund_bpm: float = 6.0
    tol_harm_bpm: float = 12.0
    range_bpm: tuple[float, float] = (30.0, 200.0)

    def __post_init__(self) -> None:
        if self.tol_fund_bpm <= 0 or self.tol_harm_bpm <= 0:
            raise PreconditionError("SNR tolerances must be positive")
        lo, hi = self.range_bpm
        if not 0 < lo < hi:
            raise PreconditionError(f"Invalid HR range {self.range_bpm}")


@dataclass(frozen=True)
class MapRequest:
    """Parameters of a pulse-map computation."""

    k: int = 9
    segment_len_s: float = 20.0
    n_segments: int = 7
    total_len_s: float = 70.0

    def __post_init__(self) -> None:
        if self.k not in ALLOWED_K:
            raise PreconditionError(f"k must be one of {ALLOWED_K}, got: {self.k}")
        if self.n_segments < 1 or self.segment_len_s <= 0:
            raise PreconditionError("Need at least one segment of positive length")
        if self.total_len_s < self.segment_len_s:
            raise PreconditionError("Total length shorter than one segment")


@dataclass(frozen=True)
class PulseMapSet:
    """Per-view quasi-stationary pulse maps; invalid pixels hold NaN.

    ``phase_c_rad`` and ``amp_c`` are stacked over channels r, g, b: shape ``(3, H, W)``.
    """

    snr_db: np.ndarray
    phase_pos_rad: np.ndarray
    hr_hz: np.ndarray
    phase_c_rad: np.ndarray
    amp_c: np.ndarray
    valid: np.ndarray
    k: int
    view_id: int = 0
    snr_clamped: np.ndarray | None = None

    def __post_init__(self) -> None:
        shape = self.valid.shape
        for name in ("snr_db", "phase_pos_rad", "hr_hz"):
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} shape differs from valid mask {shape}")
        for name in ("phase_c_rad", "amp_c"):
            if getattr(self, name).shape != (3, *shape):
                raise DimensionMismatch(f"{name} must have shape (3, {shape[0]}, {shape[1]})")

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.valid.shape[0]), int(self.valid.shape[1]))

    def channel(self, semantic: str) -> np.ndarray:
        """Return the 2D map for a semantic name such as ``snr`` or ``amp_g``."""
        if semantic == "snr":
            return self.snr_db
        if semantic == "phase_pos":
            return self.phase_pos_rad
        if semantic == "hr":
            return self.hr_hz
        kind, _, c = semantic.partition("_")
        if c in CHANNELS and kind in {"phase", "amp"}:
            stack = self.phase_c_rad if kind == "phase" else self.amp_c
            return stack[CHANNELS.index(c)]
        raise KeyError(f"Unknown map semantic: {semantic}")


@dataclass(frozen=True)
class CameraParams:
    """Pinhole camera, OpenCV convention (x right, y down, z forward).

    ``world_to_cam`` maps homogeneous world points (mm) into camera coordinates.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_cam: np.ndarray
    view_id: int = 0

    def __post_init__(self) -> None:
        m = np.asarray(self.world_to_cam, dtype=float)
        if m.shape != (4, 4):
            raise PreconditionError(f"world_to_cam must be 4x4, got {m.shape}")
        if self.fx <= 0 or self.fy <= 0:
            raise PreconditionError("Focal lengths must be positive")
        rot = m[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-8) or np.linalg.det(rot) <= 0:
            raise PreconditionError("world_to_cam rotation block is not a proper rotation")
        object.__setattr__(self, "world_to_cam", m)

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_cam[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_cam[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points; returns pixel coordinates ``(N, 2)`` (x, y) and depth ``(N,)``."""
        pc = self.to_camera(points)
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            x = self.fx * pc[:, 0] / z + self.cx
            y = self.fy * pc[:, 1] / z + self.cy
        return np.stack([x, y], axis=1), z

    def pixel_rays(self, xy: np.ndarray) -> np.ndarray:
        """Unit ray directions in world coordinates through pixel positions ``(N, 2)``."""
        xy = np.asarray(xy, dtype=float)
        d_cam = np.stack(
            [(xy[:, 0] - self.cx) / self.fx, (xy[:, 1] - self.cy) / self.fy, np.ones(len(xy))],
            axis=1,
        )
        d = d_cam @ self.rotation
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh (mm) with optional texture coordinates.

    Attributes:
        vertices: ``(V, 3)`` positions.
        faces: ``(F, 3)`` vertex indices, counter-clockwise seen from outside.
        uv_coords: ``(U, 2)`` texture coordinates in [0, 1]^2.
        face_uvs: ``(F, 3)`` indices into ``uv_coords`` per face corner.
        landmark_vertex_ids: Optional vertex ids of annotated landmarks.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv_coords: np.ndarray | None = None
    face_uvs: np.ndarray | None = None
    landmark_vertex_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise PreconditionError(f"Vertices must have shape (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise PreconditionError(f"Faces must have shape (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise PreconditionError("Face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if (self.uv_coords is None) != (self.face_uvs is None):
            raise PreconditionError("uv_coords and face_uvs must be given together")
        if self.uv_coords is not None and self.face_uvs is not None:
            uv = np.asarray(self.uv_coords, dtype=float)
            fuv = np.asarray(self.face_uvs, dtype=np.int64)
            if fuv.shape != f.shape:
                raise PreconditionError("face_uvs must match faces in shape")
            if fuv.size and (fuv.min() < 0 or fuv.max() >= len(uv)):
                raise PreconditionError("UV index out of range")
            object.__setattr__(self, "uv_coords", uv)
            object.__setattr__(self, "face_uvs", fuv)
        if self.landmark_vertex_ids is not None:
            ids = np.asarray(self.landmark_vertex_ids, dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= len(v)):
                raise PreconditionError("Landmark vertex id out of range")
            object.__setattr__(self, "landmark_vertex_ids", ids)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def has_uvs(self) -> bool:
        return self.uv_coords is not None

    @property
    def corner_uvs(self) -> np.ndarray:
        """Per-corner UVs, shape ``(F, 3, 2)``."""
        if self.uv_coords is None or self.face_uvs is None:
            raise PreconditionError("Mesh has no UVs")
        return self.uv_coords[self.face_uvs]

    @property
    def triangles(self) -> np.ndarray:
        """Corner positions, shape ``(F, 3, 3)``."""
        return self.vertices[self.faces]

    def face_normals(self, normalize: bool = True) -> np.ndarray:
        tri = self.triangles
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        if not normalize:
            return n
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalize=False), axis=1)

    def bbox_diagonal(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def with_vertices(self, vertices: np.ndarray) -> TriMesh:
        return replace(self, vertices=np.asarray(vertices, dtype=float))


TextureKind = Literal["scalar", "phase"]


@dataclass(frozen=True)
class UvTextureMap:
    """Texel grid in the shared UV space.

    Scalar textures accumulate ``sum(w * v)``; phase textures accumulate unit phasors
    ``sum(w * exp(i * v))``. ``value`` is defined where at least one view contributed.
    Row ``i`` of the grid holds texel centres at ``v = 1 - (i + 0.5) / resolution``.
    """

    semantic: str
    resolution: int
    accum: np.ndarray
    weight_sum: np.ndarray
    n_views: np.ndarray
    meta: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (self.resolution, self.resolution)
        for name in ("accum", "weight_sum", "n_views"):
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} must have shape {shape}")
        if np.any(self.weight_sum < 0):
            raise PreconditionError("weight_sum must be non-negative")

    @classmethod
    def empty(cls, resolution: int, semantic: str) -> UvTextureMap:
        shape = (resolution, resolution)
        dtype = complex if is_phase_semantic(semantic) else float
        return cls(
            semantic=semantic,
            resolution=resolution,
            accum=np.zeros(shape, dtype=dtype),
            weight_sum=np.zeros(shape),
            n_views=np.zeros(shape, dtype=np.int64),
        )

    @classmethod
    def from_values(cls, values: np.ndarray, semantic: str) -> UvTextureMap:
        """Wrap a finished value grid (NaN = undefined) as a one-contribution texture."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatch("Texture values must be a square grid")
        defined = np.isfinite(values)
        safe = np.where(defined, values, 0.0)
        accum = np.where(defined, np.exp(1j * safe), 0) if is_phase_semantic(semantic) else safe
        return cls(
            semantic=semantic,
            resolution=values.shape[0],
            accum=accum,
            weight_sum=defined.astype(float),
            n_views=defined.astype(np.int64),
        )

    @property
    def is_phase(self) -> bool:
        return np.iscomplexobj(self.accum)

    @property
    def defined(self) -> np.ndarray:
        return (self.n_views >= 1) & (self.weight_sum > 0)

    @property
    def value(self) -> np.ndarray:
        out = np.full(self.accum.shape, np.nan)
        d = self.defined
        if self.is_phase:
            ang = np.angle(self.accum[d])
            out[d] = np.where(ang <= -np.pi, np.pi, ang)
        else:
            out[d] = self.accum[d] / self.weight_sum[d]
        return out

    @property
    def confidence(self) -> np.ndarray:
        """Mean phasor magnitude for phase textures; 1 where defined for scalars."""
        out = np.full(self.accum.shape, np.nan)
        d = self.defined
        if self.is_phase:
            out[d] = np.abs(self.accum[d]) / self.weight_sum[d]
        else:
            out[d] = 1.0
        return out


@dataclass(frozen=True)
class MorphableModel:
    """Linear PCA head model with a small articulated skeleton.

    Attributes:
        mean_vertices: ``(V, 3)`` template in mm.
        shape_basis: ``(V, 3, n_beta)``.
        expression_basis: ``(V, 3, n_psi)``.
        joints: ``(J, 3)`` joint centres in the template frame.
        joint_parents: ``(J,)`` parent indices, ``-1`` for the root.
        skin_weights: ``(V, J)`` linear-blend weights, rows sum to 1.
        faces: ``(F, 3)``.
        uv_coords, face_uvs: Shared UV layout.
        landmark_vertex_ids: Vertex ids of the 68-point annotation.
    """

    mean_vertices: np.ndarray
    shape_basis: np.ndarray
    expression_basis: np.ndarray
    joints: np.ndarray
    joint_parents: np.ndarray
    skin_weights: np.ndarray
    faces: np.ndarray
    uv_coords: np.ndarray
    face_uvs: np.ndarray
    landmark_vertex_ids: np.ndarray
    joint_names: tuple[str, ...] = ("global", "neck", "jaw")

    def __post_init__(self) -> None:
        n_v = self.mean_vertices.shape[0]
        if self.mean_vertices.shape != (n_v, 3):
            raise DimensionMismatch("mean_vertices must be (V, 3)")
        for name in ("shape_basis", "expression_basis"):
            basis = getattr(self, name)
            if basis.ndim != 3 or basis.shape[:2] != (n_v, 3):
                raise DimensionMismatch(f"{name} must be (V, 3, n)")
            if not np.all(np.isfinite(basis)):
                raise PreconditionError(f"{name} contains non-finite values")
        n_j = self.joints.shape[0]
        if self.skin_weights.shape != (n_v, n_j) or self.joint_parents.shape != (n_j,):
            raise DimensionMismatch("Skeleton arrays do not match joints/vertices")
        if len(self.joint_names) != n_j:
            raise DimensionMismatch("joint_names must name every joint")
        ids = np.asarray(self.landmark_vertex_ids)
        if ids.size and (ids.min() < 0 or ids.max() >= n_v):
            raise PreconditionError("Landmark vertex id out of range")

    @property
    def n_vertices(self) -> int:
        return int(self.mean_vertices.shape[0])

    @property
    def n_beta(self) -> int:
        return int(self.shape_basis.shape[2])

    @property
    def n_psi(self) -> int:
        return int(self.expression_basis.shape[2])

    @property
    def n_joints(self) -> int:
        return int(self.joints.shape[0])

    @property
    def n_theta(self) -> int:
        return 3 * self.n_joints


@dataclass(frozen=True)
class FitState:
    """Fitting unknowns: mesh = scale * R @ M(beta, theta, psi) + T."""

    scale: float
    R: np.ndarray
    T: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    psi: np.ndarray

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise PreconditionError(f"Scale must be positive, got: {self.scale}")
        rot = np.asarray(self.R, dtype=float)
        if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise PreconditionError("R must be an orthonormal 3x3 matrix")
        object.__setattr__(self, "R", rot)
        object.__setattr__(self, "T", np.asarray(self.T, dtype=float).reshape(3))
        for name in ("beta", "theta", "psi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())

    @classmethod
    def zeros(cls, model: MorphableModel) -> FitState:
        return cls(
            scale=1.0,
            R=np.eye(3),
            T=np.zeros(3),
            beta=np.zeros(model.n_beta),
            theta=np.zeros(model.n_theta),
            psi=np.zeros(model.n_psi),
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "scale": float(self.scale),
            "R": self.R.tolist(),
            "T": self.T.tolist(),
            "beta": self.beta.tolist(),
            "theta": self.theta.tolist(),
            "psi": self.psi.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, object]) -> FitState:
        return cls(
            scale=float(data["scale"]),  # type: ignore[arg-type]
            R=np.asarray(data["R"], dtype=float),
            T=np.asarray(data["T"], dtype=float),
            beta=np.asarray(data["beta"], dtype=float),
            theta=np.asarray(data["theta"], dtype=float),
            psi=np.asarray(data["psi"], dtype=float),
        )


@dataclass(frozen=True)
class FitWeights:
    """Non-rigid fitting weights (objective evaluated in metres)."""

    lambda_D: float = 2.5
    lambda_L: float = 0.01
    lambda_beta: float = 1e-4
    lambda_psi: float = 2e-4
    lambda_theta: float = 1e-3
    sigma_gmo: float = 1e-4

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not value > 0:
                raise PreconditionError(f"{name} must be positive, got: {value}")

"""Procedural head model with the layout of a PCA morphable model.

The template is an ellipsoid (front at +z, up +y). Shape components are smooth normal
displacements, expression components are localized bumps around the mouth, brows, cheeks and
chin. Both sets are orthonormalized together so that every coefficient is identifiable; one
unit of a coefficient moves the surface by ``component_mm`` RMS.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..geometry.mesh import ellipsoid_mesh, vertex_normals
from ..models import MorphableModel

HEAD_RADII = (75.0, 110.0, 90.0)
JOINT_NAMES = ("global", "neck", "jaw")

_EXPRESSION_CENTRES = (
    (0.0, -0.45, 0.89),  # mouth
    (-0.3, 0.35, 0.89),  # left brow
    (0.3, 0.35, 0.89),  # right brow
    (-0.5, -0.1, 0.86),  # left cheek
    (0.5, -0.1, 0.86),  # right cheek
    (0.0, -0.75, 0.66),  # chin
    (0.0, 0.0, 1.0),  # nose
    (-0.35, 0.15, 0.92),  # left eye
    (0.35, 0.15, 0.92),  # right eye
)


def _shape_functions(d: np.ndarray, count: int) -> np.ndarray:
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    # first-order and mixed terms mimic translation and rotation of the template
    funcs = [
        x * x - y * y,
        3 * z * z - 1,
        x * (5 * z * z - 1),
        y * (5 * z * z - 1),
        z * (5 * z * z - 3),
        x * x * y - y**3 / 3,
        x * y * z,
        z * (x * x - y * y),
        x * (x * x - 3 * y * y),
        y * (3 * x * x - y * y),
    ]
    extra = 0
    while len(funcs) < count:
        extra += 1
        funcs.append(np.sin(np.pi * extra * y) * np.cos(np.pi * extra * x))
    return np.stack(funcs[:count], axis=1)


def landmark_layout() -> np.ndarray:
    """68 landmark positions ``(x, y)`` on the normalized frontal face plane.

    Order: jaw line (17), brows (10), nose (9), eyes (12), mouth (20).
    """
    t = np.linspace(-0.45 * np.pi, 0.45 * np.pi, 17)
    jaw = np.stack([0.8 * np.sin(t), 0.1 - 0.8 * np.cos(t)], axis=1)
    brow_x = np.concatenate([np.linspace(-0.6, -0.15, 5), np.linspace(0.15, 0.6, 5)])
    brows = np.stack(
        [brow_x, np.full(10, 0.35)],
        axis=1,
    )
    bridge = np.stack([np.zeros(4), np.linspace(0.25, -0.05, 4)], axis=1)
    base = np.stack([np.linspace(-0.15, 0.15, 5), np.full(5, -0.15)], axis=1)
    a = np.linspace(0, 2 * np.pi, 6, endpoint=False)
    eyes = np.concatenate(
        [np.stack([cx + 0.12 * np.cos(a), 0.2 + 0.05 * np.sin(a)], axis=1) for cx in (-0.35, 0.35)]
    )
    a12 = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    a8 = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    outer = np.stack([0.3 * np.cos(a12), -0.4 + 0.12 * np.sin(a12)], axis=1)
    inner = np.stack([0.18 * np.cos(a8), -0.4 + 0.05 * np.sin(a8)], axis=1)
    return np.concatenate([jaw, brows, bridge, base, eyes, outer, inner])


def _landmark_vertices(vertices: np.ndarray, radii: tuple[float, float, float]) -> np.ndarray:
    xy = landmark_layout()
    z = np.sqrt(np.clip(1.0 - (xy**2).sum(axis=1), 0.05, None))
    d = np.concatenate([xy, z[:, None]], axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    _, ids = cKDTree(vertices).query(d * np.asarray(radii))
    return np.asarray(ids, dtype=np.int64)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def build_generic_head_model(
    n_beta: int = 10,
    n_psi: int = 6,
    *,
    radii: tuple[float, float, float] = HEAD_RADII,
    n_lat: int = 32,
    n_lon: int = 48,
    component_mm: float = 5.0,
) -> MorphableModel:
    """Deterministic generic head model for the oracle and for tests."""
    base = ellipsoid_mesh(radii, n_lat, n_lon)
    v = base.vertices
    n_v = len(v)
    normals = vertex_normals(base)
    d = v / np.asarray(radii)
    d /= np.linalg.norm(d, axis=1, keepdims=True)

    shape_cols = _shape_functions(d, n_beta)[:, None, :] * normals[:, :, None]
    centres = np.asarray(_EXPRESSION_CENTRES)
    centres = centres / np.linalg.norm(centres, axis=1, keepdims=True)
    expr_cols = []
    for i in range(n_psi):
        c = centres[i % len(centres)]
        width = 0.25 * (1 + i // len(centres))
        bump = np.exp(-((d - c) ** 2).sum(axis=1) / (2 * width**2))
        expr_cols.append(bump[:, None] * normals)
    expr = np.stack(expr_cols, axis=2) if expr_cols else np.zeros((n_v, 3, 0))

    stacked = np.concatenate([shape_cols, expr], axis=2).reshape(3 * n_v, n_beta + n_psi)
    q, r = np.linalg.qr(stacked)
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))  # fixed column signs
    q = q.reshape(n_v, 3, n_beta + n_psi) * component_mm * np.sqrt(n_v)
    shape_basis, expression_basis = q[:, :, :n_beta], q[:, :, n_beta:]

    a, b, c = radii
    joints = np.array([[0.0, 0.0, 0.0], [0.0, -0.55 * b, -0.1 * c], [0.0, -0.2 * b, 0.1 * c]])
    s_neck = _sigmoid((v[:, 1] - (-0.55 * b)) / 10.0)
    s_jaw = _sigmoid((-0.25 * b - v[:, 1]) / 8.0) * _sigmoid(v[:, 2] / 10.0)
    skin = np.stack([1.0 - s_neck, s_neck * (1.0 - s_jaw), s_neck * s_jaw], axis=1)

    assert base.uv_coords is not None and base.face_uvs is not None
    return MorphableModel(
        mean_vertices=v.copy(),
        shape_basis=shape_basis,
        expression_basis=expression_basis,
        joints=joints,
        joint_parents=np.array([-1, 0, 1]),
        skin_weights=skin,
        faces=base.faces,
        uv_coords=base.uv_coords,
        face_uvs=base.face_uvs,
        landmark_vertex_ids=_landmark_vertices(v, radii),
        joint_names=JOINT_NAMES,
    )


def skin_region(model: MorphableModel, vertices: np.ndarray | None = None) -> np.ndarray:
    """Vertex mask of the frontal face and neck region used for fit statistics."""
    v = model.mean_vertices if vertices is None else vertices
    top = v[:, 1].max()
    return (v[:, 2] > 0.2 * np.abs(v[:, 2]).max()) & (v[:, 1] < 0.6 * top)

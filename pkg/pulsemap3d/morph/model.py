"""Evaluation of the morphable model and its derivatives.

Vertices are first shaped linearly, ``v = mean + S beta + E psi``, then posed by linear
blend skinning over a joint chain whose local rotations are Euler angles ``theta`` (three
per joint, applied as ``Rz @ Ry @ Rx``), and finally placed by the similarity transform
``scale * R @ v + T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.errors import DimensionMismatch
from ..models import FitState, MorphableModel, TriMesh


def euler_matrix(angles: np.ndarray) -> np.ndarray:
    """Rotation ``Rz(c) @ Ry(b) @ Rx(a)`` for ``angles = (a, b, c)`` in radians."""
    return _euler_parts(angles)[0]


def _axis_rotations(a: float, b: float, c: float) -> tuple[np.ndarray, ...]:
    ca, sa, cb, sb, cc, sc = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(c), np.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    drx = np.array([[0, 0, 0], [0, -sa, -ca], [0, ca, -sa]])
    dry = np.array([[-sb, 0, cb], [0, 0, 0], [-cb, 0, -sb]])
    drz = np.array([[-sc, -cc, 0], [cc, -sc, 0], [0, 0, 0]])
    return rx, ry, rz, drx, dry, drz


def _euler_parts(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and its three partial derivatives, shape ``(3, 3, 3)`` (axis first)."""
    rx, ry, rz, drx, dry, drz = _axis_rotations(*np.asarray(angles, dtype=float))
    rot = rz @ ry @ rx
    d = np.stack([rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx])
    return rot, d


def _local_transform(rot: np.ndarray, offset: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = offset
    return m


def joint_transforms(model: MorphableModel, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Skinning transforms and their derivatives.

    Returns:
        ``(A, dA)``: ``A`` of shape ``(J, 4, 4)`` maps rest-pose points to posed points for
        each joint; ``dA`` of shape ``(J, 3J, 4, 4)`` holds ``dA_j / dtheta_k``. Parents must
        precede their children in the joint order.
    """
    n_j = model.n_joints
    theta = np.asarray(theta, dtype=float).reshape(n_j, 3)
    joints = model.joints
    g = np.zeros((n_j, 4, 4))
    dg = np.zeros((n_j, 3 * n_j, 4, 4))
    for j in range(n_j):
        rot, d_rot = _euler_parts(theta[j])
        parent = int(model.joint_parents[j])
        offset = joints[j] - (joints[parent] if parent >= 0 else 0.0)
        local = _local_transform(rot, offset)
        if parent < 0:
            g[j] = local
            for axis in range(3):
                dg[j, 3 * j + axis, :3, :3] = d_rot[axis]
            continue
        g[j] = g[parent] @ local
        dg[j] = dg[parent] @ local
        for axis in range(3):
            d_local = np.zeros((4, 4))
            d_local[:3, :3] = d_rot[axis]
            dg[j, 3 * j + axis] += g[parent] @ d_local

    rest = np.tile(np.eye(4), (n_j, 1, 1))
    rest[:, :3, 3] = -joints
    return g @ rest, dg @ rest[:, None]


def shaped_vertices(model: MorphableModel, beta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return (
        model.mean_vertices
        + np.einsum("vdk,k->vd", model.shape_basis, beta)
        + np.einsum("vdk,k->vd", model.expression_basis, psi)
    )


def _check_lengths(model: MorphableModel, fit: FitState) -> None:
    expected = {"beta": model.n_beta, "theta": model.n_theta, "psi": model.n_psi}
    for name, size in expected.items():
        got = getattr(fit, name).size
        if got != size:
            raise DimensionMismatch(f"{name} has {got} coefficients, model expects {size}")


def model_vertices(model: MorphableModel, fit: FitState) -> np.ndarray:
    """World-space vertices ``(V, 3)`` of the model at ``fit``."""
    _check_lengths(model, fit)
    v = shaped_vertices(model, fit.beta, fit.psi)
    a, _ = joint_transforms(model, fit.theta)
    blended = np.einsum("vj,jab->vab", model.skin_weights, a)
    posed = np.einsum("vab,vb->va", blended[:, :3, :3], v) + blended[:, :3, 3]
    return fit.scale * posed @ fit.R.T + fit.T


def model_mesh(model: MorphableModel, vertices: np.ndarray | None = None) -> TriMesh:
    """Mesh sharing the model topology, UVs and landmarks (template vertices by default)."""
    return TriMesh(
        vertices=model.mean_vertices if vertices is None else vertices,
        faces=model.faces,
        uv_coords=model.uv_coords,
        face_uvs=model.face_uvs,
        landmark_vertex_ids=model.landmark_vertex_ids,
    )


def evaluate_model(model: MorphableModel, fit: FitState) -> TriMesh:
    """Mesh ``scale * R @ M(beta, theta, psi) + T``.

    Raises:
        DimensionMismatch: If a coefficient vector does not match its basis.
    """
    return model_mesh(model, model_vertices(model, fit))


@dataclass(frozen=True)
class ParameterLayout:
    """Slices of the flat non-rigid parameter vector ``[T, beta, theta, psi]``."""

    n_beta: int
    n_theta: int
    n_psi: int

    @classmethod
    def of(cls, model: MorphableModel) -> ParameterLayout:
        return cls(model.n_beta, model.n_theta, model.n_psi)

    @property
    def size(self) -> int:
        return 3 + self.n_beta + self.n_theta + self.n_psi

    @property
    def T(self) -> slice:
        return slice(0, 3)

    @property
    def beta(self) -> slice:
        return slice(3, 3 + self.n_beta)

    @property
    def theta(self) -> slice:
        start = 3 + self.n_beta
        return slice(start, start + self.n_theta)

    @property
    def psi(self) -> slice:
        start = 3 + self.n_beta + self.n_theta
        return slice(start, start + self.n_psi)

    def pack(self, fit: FitState) -> np.ndarray:
        return np.concatenate([fit.T, fit.beta, fit.theta, fit.psi])

    def unpack(self, p: np.ndarray, template: FitState) -> FitState:
        return FitState(
            scale=template.scale,
            R=template.R,
            T=p[self.T].copy(),
            beta=p[self.beta].copy(),
            theta=p[self.theta].copy(),
            psi=p[self.psi].copy(),
        )


def model_jacobian(
    model: MorphableModel, fit: FitState, vertex_ids: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """World vertices and their Jacobian with respect to ``[T, beta, theta, psi]``.

    Scale and rotation are held fixed. Returns ``(vertices (n, 3), jac (n, 3, P))`` for the
    selected vertices (all by default), lengths in mm.
    """
    _check_lengths(model, fit)
    layout = ParameterLayout.of(model)
    ids = np.arange(model.n_vertices) if vertex_ids is None else np.asarray(vertex_ids)
    w = model.skin_weights[ids]
    s_basis = model.shape_basis[ids]
    e_basis = model.expression_basis[ids]
    v = (
        model.mean_vertices[ids]
        + np.einsum("vdk,k->vd", s_basis, fit.beta)
        + np.einsum("vdk,k->vd", e_basis, fit.psi)
    )
    a, da = joint_transforms(model, fit.theta)
    blended = np.einsum("vj,jab->vab", w, a)
    rot_b = blended[:, :3, :3]
    posed = np.einsum("vab,vb->va", rot_b, v) + blended[:, :3, 3]
    sr = fit.scale * fit.R
    world = posed @ sr.T + fit.T

    jac = np.zeros((len(ids), 3, layout.size))
    jac[:, :, layout.T] = np.eye(3)
    jac[:, :, layout.beta] = np.einsum("ab,vbc,vck->vak", sr, rot_b, s_basis)
    jac[:, :, layout.psi] = np.einsum("ab,vbc,vck->vak", sr, rot_b, e_basis)
    d_blended = np.einsum("vj,jkab->vkab", w, da)  # (n, 3J, 4, 4)
    d_posed = np.einsum("vkab,vb->vka", d_blended[..., :3, :3], v) + d_blended[..., :3, 3]
    jac[:, :, layout.theta] = np.einsum("ab,vkb->vak", sr, d_posed)
    return world, jac

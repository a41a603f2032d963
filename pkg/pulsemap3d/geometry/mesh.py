"""Mesh construction and topology helpers."""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..core.errors import PreconditionError
from ..models import TriMesh


def plane_mesh(
    width_mm: float,
    height_mm: float,
    nx: int = 8,
    ny: int = 8,
    center: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> TriMesh:
    """Axis-aligned grid in the z = const plane, facing +z, with UVs spanning [0, 1]^2.

    ``u`` grows with x and ``v`` with y.
    """
    if nx < 1 or ny < 1:
        raise PreconditionError("Plane needs at least one cell per axis")
    xs = np.linspace(-width_mm / 2, width_mm / 2, nx + 1)
    ys = np.linspace(-height_mm / 2, height_mm / 2, ny + 1)
    gx, gy = np.meshgrid(xs, ys)  # rows follow y
    vertices = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1) + np.asarray(center)
    uv = np.stack(
        [(gx.ravel() + width_mm / 2) / width_mm, (gy.ravel() + height_mm / 2) / height_mm], axis=1
    )
    faces = []
    for i in range(ny):
        for j in range(nx):
            a = i * (nx + 1) + j
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            faces.append((a, b, c))
            faces.append((a, c, d))
    f = np.asarray(faces, dtype=np.int64)
    return TriMesh(vertices=vertices, faces=f, uv_coords=uv, face_uvs=f.copy())


def ellipsoid_mesh(
    radii: tuple[float, float, float] = (75.0, 110.0, 90.0),
    n_lat: int = 24,
    n_lon: int = 32,
) -> TriMesh:
    """Latitude/longitude ellipsoid with the front (+z) at ``u = 0.5`` and the seam at the back.

    Vertex ``(a sin(t) sin(p), b cos(t), c sin(t) cos(p))`` for polar angle ``t`` from +y and
    azimuth ``p`` in [-pi, pi); ``u = (p + pi) / 2pi`` and ``v = 1 - t / pi``. Texture
    coordinates along the seam and at the poles are duplicated so that every face has a
    continuous UV triangle.
    """
    if n_lat < 2 or n_lon < 3:
        raise PreconditionError("Ellipsoid needs n_lat >= 2 and n_lon >= 3")
    a, b, c = radii
    rings = np.arange(1, n_lat) * np.pi / n_lat
    phis = -np.pi + 2 * np.pi * np.arange(n_lon) / n_lon
    t, p = np.meshgrid(rings, phis, indexing="ij")
    ring_vertices = np.stack(
        [a * np.sin(t) * np.sin(p), b * np.cos(t), c * np.sin(t) * np.cos(p)], axis=-1
    ).reshape(-1, 3)
    north = np.array([[0.0, b, 0.0]])
    south = np.array([[0.0, -b, 0.0]])
    vertices = np.concatenate([north, ring_vertices, south])
    south_id = len(vertices) - 1

    def vid(k: int, j: int) -> int:
        return 1 + (k - 1) * n_lon + (j % n_lon)

    # ring UVs include the duplicated seam column j == n_lon
    ring_u = np.arange(n_lon + 1) / n_lon
    ring_v = np.repeat(1.0 - np.arange(1, n_lat) / n_lat, n_lon + 1)
    ring_uv = np.stack([np.tile(ring_u, n_lat - 1), ring_v], axis=1)
    pole_u = (np.arange(n_lon) + 0.5) / n_lon
    north_uv = np.stack([pole_u, np.ones(n_lon)], axis=1)
    south_uv = np.stack([pole_u, np.zeros(n_lon)], axis=1)
    uv = np.concatenate([ring_uv, north_uv, south_uv])
    north_base = len(ring_uv)
    south_base = north_base + n_lon

    def uid(k: int, j: int) -> int:
        return (k - 1) * (n_lon + 1) + j

    faces: list[tuple[int, int, int]] = []
    face_uvs: list[tuple[int, int, int]] = []
    for j in range(n_lon):
        faces.append((0, vid(1, j), vid(1, j + 1)))
        face_uvs.append((north_base + j, uid(1, j), uid(1, j + 1)))
    for k in range(1, n_lat - 1):
        for j in range(n_lon):
            faces.append((vid(k, j), vid(k + 1, j), vid(k + 1, j + 1)))
            face_uvs.append((uid(k, j), uid(k + 1, j), uid(k + 1, j + 1)))
            faces.append((vid(k, j), vid(k + 1, j + 1), vid(k, j + 1)))
            face_uvs.append((uid(k, j), uid(k + 1, j + 1), uid(k, j + 1)))
    last = n_lat - 1
    for j in range(n_lon):
        faces.append((vid(last, j), south_id, vid(last, j + 1)))
        face_uvs.append((uid(last, j), south_base + j, uid(last, j + 1)))

    return TriMesh(
        vertices=vertices,
        faces=np.asarray(faces, dtype=np.int64),
        uv_coords=uv,
        face_uvs=np.asarray(face_uvs, dtype=np.int64),
    )


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted unit vertex normals."""
    fn = mesh.face_normals(normalize=False)
    vn = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(vn, mesh.faces[:, corner], fn)
    norm = np.linalg.norm(vn, axis=1, keepdims=True)
    return np.divide(vn, norm, out=np.zeros_like(vn), where=norm > 0)


def face_components(mesh: TriMesh) -> tuple[int, np.ndarray]:
    """Connected components of faces sharing a vertex; returns ``(count, label per face)``."""
    f = mesh.faces
    if len(f) == 0:
        return 0, np.zeros(0, dtype=np.int64)
    rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    graph = coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices)
    )
    count, labels = connected_components(graph, directed=False)
    return int(count), labels[f[:, 0]]


def submesh(mesh: TriMesh, face_mask: np.ndarray) -> TriMesh:
    """Keep the selected faces and drop vertices no longer referenced."""
    faces = mesh.faces[face_mask]
    used = np.unique(faces)
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    lmk = None
    if mesh.landmark_vertex_ids is not None:
        kept = remap[mesh.landmark_vertex_ids]
        lmk = kept[kept >= 0]
    uv = fuv = None
    if mesh.uv_coords is not None and mesh.face_uvs is not None:
        uv, fuv = mesh.uv_coords, mesh.face_uvs[face_mask]
    return TriMesh(
        vertices=mesh.vertices[used],
        faces=remap[faces],
        uv_coords=uv,
        face_uvs=fuv,
        landmark_vertex_ids=lmk,
    )

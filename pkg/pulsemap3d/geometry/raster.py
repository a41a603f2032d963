"""Software rasterizer with a depth buffer, ray casting and landmark backprojection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core.errors import LandmarkOffSurface
from ..core.logging import get_logger, log_with_context
from ..models import CameraParams, TriMesh

logger = get_logger("geometry.raster")

NEAR_MM = 1e-6
INSIDE_TOL = 1e-9


@dataclass(frozen=True)
class RasterResult:
    """Per-pixel nearest surface; empty pixels have ``face_id == -1`` and infinite depth.

    ``bary`` holds perspective-correct barycentric coordinates on the hit face.
    """

    depth: np.ndarray
    face_id: np.ndarray
    bary: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return self.face_id >= 0

    def surface_points(self, mesh: TriMesh) -> np.ndarray:
        """World positions of the hit points, NaN where empty."""
        out = np.full(self.bary.shape, np.nan)
        hit = self.hit
        tri = mesh.triangles[self.face_id[hit]]
        out[hit] = np.einsum("nk,nkd->nd", self.bary[hit], tri)
        return out


def _edge_barycentrics(
    p: np.ndarray, px: np.ndarray, py: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    (x0, y0), (x1, y1), (x2, y2) = p
    d = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if abs(d) < 1e-12:
        return None
    l1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) / d
    l2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) / d
    return 1.0 - l1 - l2, l1, l2


def rasterize(mesh: TriMesh, cam: CameraParams) -> RasterResult:
    """Render face ids, depth and barycentrics of ``mesh`` seen from ``cam``.

    Faces are drawn in index order with a strict less-than depth test, so ties keep the
    lower face id. Back faces (``n . v0 >= 0`` in camera space) and faces reaching behind
    the near plane are skipped. Pixel (row i, col j) samples the point (x=j, y=i).
    """
    h, w = cam.height, cam.width
    depth = np.full((h, w), np.inf)
    face_id = -np.ones((h, w), dtype=np.int64)
    bary = np.zeros((h, w, 3))
    if mesh.n_faces == 0:
        return RasterResult(depth, face_id, bary)

    vc = cam.to_camera(mesh.vertices)
    z = vc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        screen = np.stack([cam.fx * vc[:, 0] / z + cam.cx, cam.fy * vc[:, 1] / z + cam.cy], axis=1)

    tri_c = vc[mesh.faces]
    normals = np.cross(tri_c[:, 1] - tri_c[:, 0], tri_c[:, 2] - tri_c[:, 0])
    front = np.einsum("fd,fd->f", normals, tri_c[:, 0]) < 0
    in_front = np.all(z[mesh.faces] > NEAR_MM, axis=1)

    for f in np.flatnonzero(front & in_front):
        idx = mesh.faces[f]
        p = screen[idx]
        x_lo = max(int(np.ceil(p[:, 0].min())), 0)
        x_hi = min(int(np.floor(p[:, 0].max())), w - 1)
        y_lo = max(int(np.ceil(p[:, 1].min())), 0)
        y_hi = min(int(np.floor(p[:, 1].max())), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        py, px = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1].astype(float)
        lam = _edge_barycentrics(p, px, py)
        if lam is None:
            continue
        l0, l1, l2 = lam
        inside = (l0 >= -INSIDE_TOL) & (l1 >= -INSIDE_TOL) & (l2 >= -INSIDE_TOL)
        if not inside.any():
            continue
        zf = z[idx]
        w0, w1, w2 = l0 / zf[0], l1 / zf[1], l2 / zf[2]
        z_pix = 1.0 / (w0 + w1 + w2)
        win = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        closer = inside & (z_pix < depth[win])
        if not closer.any():
            continue
        depth[win] = np.where(closer, z_pix, depth[win])
        face_id[win] = np.where(closer, f, face_id[win])
        persp = np.stack([w0 * z_pix, w1 * z_pix, w2 * z_pix], axis=-1)
        bary[win] = np.where(closer[..., None], persp, bary[win])

    return RasterResult(depth, face_id, bary)


def ray_triangle_intersect(
    origins: np.ndarray, dirs: np.ndarray, tri: np.ndarray, tol: float = 0.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Moller-Trumbore intersection of every ray with every triangle.

    Args:
        origins: ``(M, 3)`` ray origins.
        dirs: ``(M, 3)`` ray directions.
        tri: ``(F, 3, 3)`` triangle corners.
        tol: Slack on the barycentric inside test.

    Returns:
        ``(t, u, v)`` arrays of shape ``(M, F)``; ``t`` is ``inf`` where the ray misses.
    """
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    pvec = np.cross(dirs[:, None, :], e2[None, :, :])
    det = np.einsum("mfd,fd->mf", pvec, e1)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origins[:, None, :] - tri[None, :, 0]
    u = np.einsum("mfd,mfd->mf", tvec, pvec) * inv
    qvec = np.cross(tvec, e1[None, :, :])
    v = np.einsum("md,mfd->mf", dirs, qvec) * inv
    t = np.einsum("mfd,fd->mf", qvec, e2) * inv
    hit = ok & (u >= -tol) & (v >= -tol) & (u + v <= 1.0 + tol)
    return np.where(hit, t, np.inf), u, v


@dataclass(frozen=True)
class BackprojectionResult:
    """3D landmarks (NaN rows where missing) and the indices that missed the surface."""

    points: np.ndarray
    face_ids: np.ndarray
    missing: tuple[int, ...]

    @property
    def found(self) -> np.ndarray:
        return self.face_ids >= 0

    def errors(self) -> list[LandmarkOffSurface]:
        return [LandmarkOffSurface(f"Landmark {i} does not hit the surface") for i in self.missing]


def backproject_landmarks(
    lmk_2d: np.ndarray, raster: RasterResult, mesh: TriMesh, cam: CameraParams
) -> BackprojectionResult:
    """Lift 2D landmarks onto the rendered surface.

    A landmark is on the surface when its nearest pixel is covered in ``raster``; its 3D
    position is the nearest intersection of the camera ray through the exact sub-pixel
    location with the mesh, expressed by barycentric interpolation on the hit face.
    Landmarks that miss are reported in ``missing`` instead of raising.
    """
    pts = np.asarray(lmk_2d, dtype=float).reshape(-1, 2)
    out = np.full((len(pts), 3), np.nan)
    faces_hit = -np.ones(len(pts), dtype=np.int64)
    missing: list[int] = []
    tri = mesh.triangles
    origin = cam.center
    for i, (x, y) in enumerate(pts):
        if not (np.isfinite(x) and np.isfinite(y)):
            missing.append(i)
            continue
        col, row = int(round(x)), int(round(y))
        if not (0 <= row < cam.height and 0 <= col < cam.width) or raster.face_id[row, col] < 0:
            missing.append(i)
            continue
        d = cam.pixel_rays(np.array([[x, y]]))
        t, u, v = ray_triangle_intersect(origin[None, :], d, tri, tol=1e-9)
        t = np.where(t[0] > 0, t[0], np.inf)
        f = int(np.argmin(t))
        if not np.isfinite(t[f]):
            missing.append(i)
            continue
        b = np.array([1.0 - u[0, f] - v[0, f], u[0, f], v[0, f]])
        out[i] = b @ tri[f]
        faces_hit[i] = f
    if missing:
        log_with_context(
            logger,
            logging.WARNING,
            "Landmarks off surface",
            view_id=cam.view_id,
            missing=len(missing),
            total=len(pts),
        )
    return BackprojectionResult(points=out, face_ids=faces_hit, missing=tuple(missing))

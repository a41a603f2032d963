"""Texture-space surface sampling, texel visibility, multi-view baking and reprojection.

Texel ``(i, j)`` of an ``R x R`` texture is centred at ``u = (j + 0.5) / R`` and
``v = 1 - (i + 0.5) / R``.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..core.errors import DimensionMismatch, MissingUVs, SemanticMismatch
from ..core.logging import get_logger, log_with_context
from ..models import CameraParams, TriMesh, UvTextureMap, is_phase_semantic
from .raster import RasterResult, rasterize, ray_triangle_intersect

logger = get_logger("geometry.texture")

WeightMode = Literal["cosine", "uniform"]
TILE_PX = 16
PAIR_CHUNK = 2_000_000


@dataclass(frozen=True)
class TexelSurface:
    """Surface point behind every texel; ``face_id == -1`` where no face covers the texel."""

    face_id: np.ndarray
    bary: np.ndarray
    position: np.ndarray
    normal: np.ndarray

    @property
    def resolution(self) -> int:
        return int(self.face_id.shape[0])

    @property
    def covered(self) -> np.ndarray:
        return self.face_id >= 0


def texel_centers(resolution: int) -> np.ndarray:
    """UV coordinates ``(R, R, 2)`` of the texel centres."""
    idx = (np.arange(resolution) + 0.5) / resolution
    u = np.broadcast_to(idx[None, :], (resolution, resolution))
    v = np.broadcast_to(1.0 - idx[:, None], (resolution, resolution))
    return np.stack([u, v], axis=-1)


def uv_to_texel(uv: np.ndarray, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Continuous texel coordinates (column, row) of UV points."""
    uv = np.asarray(uv, dtype=float)
    return uv[..., 0] * resolution - 0.5, (1.0 - uv[..., 1]) * resolution - 0.5


def texel_surface(mesh: TriMesh, resolution: int) -> TexelSurface:
    """Rasterize the mesh in UV space.

    Faces are visited in index order and the first face covering a texel keeps it.

    Raises:
        MissingUVs: If the mesh has no texture coordinates.
    """
    if not mesh.has_uvs:
        raise MissingUVs("Mesh has no texture coordinates")
    face_id = -np.ones((resolution, resolution), dtype=np.int64)
    bary = np.zeros((resolution, resolution, 3))
    cols, rows = uv_to_texel(mesh.corner_uvs, resolution)  # (F, 3) each

    for f in range(mesh.n_faces):
        x, y = cols[f], rows[f]
        x_lo, x_hi = max(int(np.ceil(x.min())), 0), min(int(np.floor(x.max())), resolution - 1)
        y_lo, y_hi = max(int(np.ceil(y.min())), 0), min(int(np.floor(y.max())), resolution - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        d = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
        if abs(d) < 1e-14:
            continue
        py, px = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1].astype(float)
        l1 = ((px - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (py - y[0])) / d
        l2 = ((x[1] - x[0]) * (py - y[0]) - (px - x[0]) * (y[1] - y[0])) / d
        l0 = 1.0 - l1 - l2
        win = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        take = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9) & (face_id[win] < 0)
        if not take.any():
            continue
        face_id[win] = np.where(take, f, face_id[win])
        bary[win] = np.where(take[..., None], np.stack([l0, l1, l2], axis=-1), bary[win])

    covered = face_id >= 0
    position = np.full((resolution, resolution, 3), np.nan)
    normal = np.full((resolution, resolution, 3), np.nan)
    fid = face_id[covered]
    position[covered] = np.einsum("nk,nkd->nd", bary[covered], mesh.triangles[fid])
    normal[covered] = mesh.face_normals()[fid]
    return TexelSurface(face_id=face_id, bary=bary, position=position, normal=normal)


@dataclass(frozen=True)
class TexelVisibility:
    """Per-texel visibility in one camera plus the sampling geometry of visible texels."""

    visible: np.ndarray
    pixel_xy: np.ndarray
    cosine: np.ndarray


def _occluded(
    origins: np.ndarray,
    dirs: np.ndarray,
    limits: np.ndarray,
    own_faces: np.ndarray,
    tri: np.ndarray,
    face_ids: np.ndarray,
    eps: float,
) -> np.ndarray:
    """True where a ray hits one of ``face_ids`` with ``eps < t < limit - eps``."""
    out = np.zeros(len(origins), dtype=bool)
    if len(face_ids) == 0 or len(origins) == 0:
        return out
    step = max(1, PAIR_CHUNK // len(face_ids))
    for s in range(0, len(origins), step):
        sl = slice(s, s + step)
        t, _, _ = ray_triangle_intersect(origins[sl], dirs[sl], tri[face_ids])
        not_own = face_ids[None, :] != own_faces[sl, None]
        blocked = (t > eps) & (t < limits[sl, None] - eps) & not_own
        out[sl] = blocked.any(axis=1)
    return out


def visible_texels(
    surface: TexelSurface,
    mesh: TriMesh,
    cam: CameraParams,
    eps_rel: float = 1e-3,
    *,
    brute_force: bool = False,
) -> TexelVisibility:
    """Texels whose surface point is front-facing, inside the image and unoccluded.

    Occlusion is decided by casting the segment from the surface point to the camera centre
    against the mesh (``eps = eps_rel * bbox diagonal``). Faces are binned into screen tiles
    by their projected bounding box; a blocking face must cover the point's projection, so
    only the faces of the point's tile are tested. ``brute_force`` tests every face.
    """
    res = surface.resolution
    visible = np.zeros((res, res), dtype=bool)
    pixel_xy = np.full((res, res, 2), np.nan)
    cosine = np.zeros((res, res))
    covered = surface.covered
    if not covered.any():
        return TexelVisibility(visible, pixel_xy, cosine)

    eps = eps_rel * mesh.bbox_diagonal()
    pos = surface.position[covered]
    nrm = surface.normal[covered]
    own = surface.face_id[covered]
    to_cam = cam.center[None, :] - pos
    dist = np.linalg.norm(to_cam, axis=1)
    dirs = to_cam / np.where(dist > 0, dist, 1.0)[:, None]
    cos = np.einsum("nd,nd->n", nrm, dirs)
    xy, z = cam.project(pos)
    col, row = np.round(xy[:, 0]), np.round(xy[:, 1])
    in_image = (z > 0) & (col >= 0) & (col <= cam.width - 1) & (row >= 0) & (row <= cam.height - 1)
    candidate = (cos > 0) & in_image & (dist > 2 * eps)

    tri = mesh.triangles
    occluded = np.zeros(len(pos), dtype=bool)
    cand_idx = np.flatnonzero(candidate)
    if brute_force:
        all_faces = np.arange(mesh.n_faces)
        occluded[cand_idx] = _occluded(
            pos[cand_idx], dirs[cand_idx], dist[cand_idx], own[cand_idx], tri, all_faces, eps
        )
    else:
        occluded[cand_idx] = _occluded_tiled(
            pos[cand_idx],
            dirs[cand_idx],
            dist[cand_idx],
            own[cand_idx],
            xy[cand_idx],
            mesh,
            cam,
            eps,
        )

    vis = candidate & ~occluded
    flat_visible = np.zeros(len(pos), dtype=bool)
    flat_visible[vis] = True
    visible[covered] = flat_visible
    px = np.full((len(pos), 2), np.nan)
    px[vis] = xy[vis]
    pixel_xy[covered] = px
    cosine[covered] = np.where(vis, np.maximum(cos, 0.0), 0.0)
    return TexelVisibility(visible, pixel_xy, cosine)


def _occluded_tiled(
    pos: np.ndarray,
    dirs: np.ndarray,
    dist: np.ndarray,
    own: np.ndarray,
    xy: np.ndarray,
    mesh: TriMesh,
    cam: CameraParams,
    eps: float,
) -> np.ndarray:
    tri = mesh.triangles
    vxy, vz = cam.project(mesh.vertices)
    fz = vz[mesh.faces]
    fxy = vxy[mesh.faces]
    behind = np.any(fz <= 0, axis=1)
    n_tx = (cam.width + TILE_PX - 1) // TILE_PX
    n_ty = (cam.height + TILE_PX - 1) // TILE_PX

    tiles: dict[tuple[int, int], list[int]] = defaultdict(list)
    front_ids = np.flatnonzero(~behind)
    lo = np.floor((fxy[front_ids].min(axis=1) - 1.0) / TILE_PX).astype(np.int64)
    hi = np.floor((fxy[front_ids].max(axis=1) + 1.0) / TILE_PX).astype(np.int64)
    lo = np.clip(lo, 0, [n_tx - 1, n_ty - 1])
    hi = np.clip(hi, -1, [n_tx - 1, n_ty - 1])
    for f, (x0, y0), (x1, y1) in zip(front_ids, lo, hi):
        for ty in range(y0, y1 + 1):
            for tx in range(x0, x1 + 1):
                tiles[(tx, ty)].append(int(f))
    everywhere = np.flatnonzero(behind)

    out = np.zeros(len(pos), dtype=bool)
    tile_of = np.floor(xy / TILE_PX).astype(np.int64)
    tile_of = np.clip(tile_of, 0, [n_tx - 1, n_ty - 1])
    keys = tile_of[:, 0] * n_ty + tile_of[:, 1]
    for key in np.unique(keys):
        members = np.flatnonzero(keys == key)
        tx, ty = int(key // n_ty), int(key % n_ty)
        face_ids = np.concatenate([np.asarray(tiles.get((tx, ty), []), dtype=np.int64), everywhere])
        out[members] = _occluded(
            pos[members], dirs[members], dist[members], own[members], tri, face_ids, eps
        )
    return out


def bake_view(
    map2d: np.ndarray,
    mesh: TriMesh,
    cam: CameraParams,
    tex: UvTextureMap,
    *,
    surface: TexelSurface | None = None,
    raster: RasterResult | None = None,
    visibility: TexelVisibility | None = None,
    weight_mode: WeightMode = "cosine",
    eps_rel: float = 1e-3,
) -> UvTextureMap:
    """Accumulate one view's 2D map into ``tex`` and return the updated texture.

    Each visible texel samples the nearest pixel of its projection; the pixel must be covered
    by the rendered mesh and hold a finite value. Scalars accumulate ``w * value`` and
    phases accumulate ``w * exp(i * value)``, ``w`` being the incidence cosine or 1.
    A precomputed ``visibility`` for this camera and texel surface may be passed in.

    Raises:
        MissingUVs: If the mesh has no texture coordinates.
        DimensionMismatch: If the map does not match the camera image size.
    """
    if not mesh.has_uvs:
        raise MissingUVs("Mesh has no texture coordinates")
    map2d = np.asarray(map2d, dtype=float)
    if map2d.shape != (cam.height, cam.width):
        raise DimensionMismatch(f"Map shape {map2d.shape} != camera {(cam.height, cam.width)}")
    surface = surface or texel_surface(mesh, tex.resolution)
    if surface.resolution != tex.resolution:
        raise DimensionMismatch("Texel surface resolution differs from texture resolution")
    raster = raster or rasterize(mesh, cam)

    vis = visibility or visible_texels(surface, mesh, cam, eps_rel)
    rows, cols = np.nonzero(vis.visible)
    xy = vis.pixel_xy[rows, cols]
    pc = np.round(xy[:, 0]).astype(np.int64)
    pr = np.round(xy[:, 1]).astype(np.int64)
    values = map2d[pr, pc]
    usable = np.isfinite(values) & raster.hit[pr, pc]
    weights = vis.cosine[rows, cols] if weight_mode == "cosine" else np.ones(len(rows))
    usable &= weights > 0
    rows, cols, values, weights = rows[usable], cols[usable], values[usable], weights[usable]

    accum = tex.accum.copy()
    weight_sum = tex.weight_sum.copy()
    n_views = tex.n_views.copy()
    if tex.is_phase:
        accum[rows, cols] += weights * np.exp(1j * values)
    else:
        accum[rows, cols] += weights * values
    weight_sum[rows, cols] += weights
    n_views[rows, cols] += 1

    log_with_context(
        logger,
        logging.DEBUG,
        "View baked",
        view_id=cam.view_id,
        semantic=tex.semantic,
        visible_texels=int(vis.visible.sum()),
        written_texels=int(len(rows)),
    )
    return UvTextureMap(
        semantic=tex.semantic,
        resolution=tex.resolution,
        accum=accum,
        weight_sum=weight_sum,
        n_views=n_views,
        meta=dict(tex.meta),
    )


def bake_views(
    maps: Sequence[np.ndarray],
    mesh: TriMesh,
    cams: Sequence[CameraParams],
    semantic: str,
    resolution: int,
    *,
    weight_mode: WeightMode = "cosine",
    eps_rel: float = 1e-3,
    surface: TexelSurface | None = None,
    visibilities: Sequence[TexelVisibility] | None = None,
    rasters: Sequence[RasterResult] | None = None,
) -> UvTextureMap:
    """Bake several views in the given order into one texture.

    Per-view ``visibilities`` and ``rasters`` are computed on the fly unless supplied.
    """
    if len(maps) != len(cams):
        raise DimensionMismatch(f"{len(maps)} maps for {len(cams)} cameras")
    if visibilities is not None and len(visibilities) != len(cams):
        raise DimensionMismatch(f"{len(visibilities)} visibilities for {len(cams)} cameras")
    surface = surface or texel_surface(mesh, resolution)
    tex = UvTextureMap.empty(resolution, semantic)
    for i, (map2d, cam) in enumerate(zip(maps, cams)):
        tex = bake_view(
            map2d,
            mesh,
            cam,
            tex,
            surface=surface,
            visibility=None if visibilities is None else visibilities[i],
            raster=None if rasters is None else rasters[i],
            weight_mode=weight_mode,
            eps_rel=eps_rel,
        )
    log_with_context(
        logger,
        logging.INFO,
        "Texture baked",
        semantic=semantic,
        views=len(cams),
        defined_fraction=round(float(tex.defined.mean()), 4),
    )
    return tex


def sample_texture(
    values: np.ndarray,
    uv: np.ndarray,
    *,
    mode: Literal["bilinear", "nearest"] = "bilinear",
    phase: bool = False,
) -> np.ndarray:
    """Sample a texel grid at UV points; NaN texels are left out and weights renormalized.

    Phase textures are interpolated as unit phasors.
    """
    res = values.shape[0]
    fx, fy = uv_to_texel(uv, res)
    out_shape = np.shape(fx)
    fx, fy = np.ravel(fx), np.ravel(fy)
    ok = np.isfinite(fx) & np.isfinite(fy)
    result = np.full(fx.shape, np.nan)
    if mode == "nearest":
        c = np.clip(np.round(np.where(ok, fx, 0)), 0, res - 1).astype(np.int64)
        r = np.clip(np.round(np.where(ok, fy, 0)), 0, res - 1).astype(np.int64)
        result[ok] = values[r[ok], c[ok]]
        return result.reshape(out_shape)

    x0 = np.floor(np.where(ok, fx, 0)).astype(np.int64)
    y0 = np.floor(np.where(ok, fy, 0)).astype(np.int64)
    ax = np.where(ok, fx, 0) - x0
    ay = np.where(ok, fy, 0) - y0
    acc = np.zeros(fx.shape, dtype=complex if phase else float)
    wsum = np.zeros(fx.shape)
    for dy, dx, wgt in (
        (0, 0, (1 - ax) * (1 - ay)),
        (0, 1, ax * (1 - ay)),
        (1, 0, (1 - ax) * ay),
        (1, 1, ax * ay),
    ):
        r = np.clip(y0 + dy, 0, res - 1)
        c = np.clip(x0 + dx, 0, res - 1)
        v = values[r, c]
        good = np.isfinite(v) & (wgt > 0)
        vv = np.where(good, v, 0.0)
        acc += np.where(good, wgt, 0.0) * (np.exp(1j * vv) if phase else vv)
        wsum += np.where(good, wgt, 0.0)
    done = ok & (wsum > 0)
    if phase:
        ang = np.angle(acc[done])
        result[done] = np.where(ang <= -np.pi, np.pi, ang)
    else:
        num = acc[done].real if np.iscomplexobj(acc) else acc[done]
        result[done] = num / wsum[done]
    return result.reshape(out_shape)


def pixel_uvs(mesh: TriMesh, raster: RasterResult) -> np.ndarray:
    """UV coordinate of the surface seen at every pixel, NaN where empty."""
    if not mesh.has_uvs:
        raise MissingUVs("Mesh has no texture coordinates")
    out = np.full(raster.bary.shape[:2] + (2,), np.nan)
    hit = raster.hit
    corner = mesh.corner_uvs[raster.face_id[hit]]
    out[hit] = np.einsum("nk,nkd->nd", raster.bary[hit], corner)
    return out


def reproject(
    tex: UvTextureMap, mesh: TriMesh, cam: CameraParams, raster: RasterResult | None = None
) -> np.ndarray:
    """Render a baked texture back into a view; empty or undefined pixels are NaN."""
    raster = raster or rasterize(mesh, cam)
    uv = pixel_uvs(mesh, raster)
    return sample_texture(tex.value, uv, phase=tex.is_phase)


def check_compatible(textures: Sequence[UvTextureMap], semantic: str | None = None) -> None:
    """Raise ``SemanticMismatch`` unless all textures share resolution and semantic."""
    if not textures:
        return
    sem = semantic or textures[0].semantic
    res = textures[0].resolution
    for t in textures:
        if t.semantic != sem or t.resolution != res:
            raise SemanticMismatch(
                f"Texture {t.semantic}@{t.resolution} does not match {sem}@{res}"
            )
    if is_phase_semantic(sem) and not all(t.is_phase for t in textures):
        raise SemanticMismatch(f"Phase semantic {sem} needs phasor textures")

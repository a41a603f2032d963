"""Landmark-based similarity alignment and scan cleaning."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..core.errors import DegenerateConfiguration
from ..core.logging import get_logger, log_with_context
from ..geometry.mesh import face_components, submesh
from ..models import TriMesh

logger = get_logger("morph.align")

COLLINEAR_TOL = 1e-9


def rigid_align(src_lmk: np.ndarray, dst_lmk: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Similarity ``(s, R, T)`` minimizing ``sum ||s R x + T - y||^2`` (Umeyama).

    Args:
        src_lmk: ``(N, 3)`` source points.
        dst_lmk: ``(N, 3)`` corresponding target points.

    Raises:
        DegenerateConfiguration: For fewer than 3 points, or collinear/coincident sources.
    """
    src = np.asarray(src_lmk, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst_lmk, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape:
        raise DegenerateConfiguration(f"Point sets differ in shape: {src.shape} vs {dst.shape}")
    finite = np.isfinite(src).all(axis=1) & np.isfinite(dst).all(axis=1)
    src, dst = src[finite], dst[finite]
    if len(src) < 3:
        raise DegenerateConfiguration(f"Need at least 3 correspondences, got {len(src)}")

    mu_src, mu_dst = src.mean(axis=0), dst.mean(axis=0)
    sc, dc = src - mu_src, dst - mu_dst
    spread = np.linalg.svd(sc, compute_uv=False)
    if spread[0] == 0 or spread[1] <= COLLINEAR_TOL * spread[0]:
        raise DegenerateConfiguration("Source points are collinear or coincident")

    cov = dc.T @ sc / len(src)
    u, d, vt = np.linalg.svd(cov)
    sign = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2, 2] = -1.0
    rot = u @ sign @ vt
    var_src = (sc**2).sum() / len(src)
    scale = float(np.trace(np.diag(d) @ sign) / var_src)
    trans = mu_dst - scale * rot @ mu_src
    return scale, rot, trans


def apply_similarity(
    points: np.ndarray, scale: float, rot: np.ndarray, trans: np.ndarray
) -> np.ndarray:
    return scale * np.asarray(points, dtype=float) @ rot.T + trans


def rotation_angle(rot_a: np.ndarray, rot_b: np.ndarray) -> float:
    """Geodesic angle in radians between two rotations."""
    c = (np.trace(rot_a.T @ rot_b) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class CleanedScan:
    """Cleaned scan in a recentred frame: ``mesh.vertices == original - offset``."""

    mesh: TriMesh
    offset: np.ndarray
    landmarks: np.ndarray | None
    dropped_faces: int


def clean_scan(
    scan: TriMesh, landmarks: np.ndarray | None = None, min_component_fraction: float = 0.01
) -> CleanedScan:
    """Drop small disconnected pieces and recentre the scan.

    Components with fewer than ``min_component_fraction`` of all faces are removed. The scan
    is recentred on the centroid of the finite landmarks, or on the vertex centroid when no
    landmark is given.
    """
    count, labels = face_components(scan)
    keep = np.ones(scan.n_faces, dtype=bool)
    if count > 1:
        sizes = np.bincount(labels, minlength=count)
        keep = sizes[labels] >= min_component_fraction * scan.n_faces
    cleaned = submesh(scan, keep) if not keep.all() else scan

    lmk = None if landmarks is None else np.asarray(landmarks, dtype=float).reshape(-1, 3)
    if lmk is not None and np.isfinite(lmk).all(axis=1).any():
        offset = lmk[np.isfinite(lmk).all(axis=1)].mean(axis=0)
    else:
        offset = cleaned.vertices.mean(axis=0)
    dropped = int((~keep).sum())
    log_with_context(
        logger,
        logging.INFO,
        "Scan cleaned",
        components=count,
        dropped_faces=dropped,
        offset_mm=[round(float(x), 3) for x in offset],
    )
    return CleanedScan(
        mesh=cleaned.with_vertices(cleaned.vertices - offset),
        offset=offset,
        landmarks=None if lmk is None else lmk - offset,
        dropped_faces=dropped,
    )

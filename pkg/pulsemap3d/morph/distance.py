"""Point-to-surface distances between meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..core.errors import NoCorrespondences
from ..models import TriMesh


def closest_point_on_triangles(
    p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Closest point to ``p[i]`` on triangle ``(a[i], b[i], c[i])``, all arrays ``(N, 3)``.

    Voronoi-region classification after Ericson, "Real-Time Collision Detection".
    """

    def dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("nd,nd->n", u, v)

    ab, ac = b - a, c - a
    ap, bp, cp = p - a, p - b, p - c
    d1, d2 = dot(ab, ap), dot(ac, ap)
    d3, d4 = dot(ab, bp), dot(ac, bp)
    d5, d6 = dot(ab, cp), dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        out = a + ab * v[:, None] + ac * w[:, None]

        # later assignments take precedence
        e_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t = np.where(e_bc, (d4 - d3) / ((d4 - d3) + (d5 - d6)), 0.0)
        out = np.where(e_bc[:, None], b + (c - b) * t[:, None], out)

        e_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = np.where(e_ac, d2 / (d2 - d6), 0.0)
        out = np.where(e_ac[:, None], a + ac * t[:, None], out)

        out = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, out)

        e_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = np.where(e_ab, d1 / (d1 - d3), 0.0)
        out = np.where(e_ab[:, None], a + ab * t[:, None], out)

        out = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, out)
        out = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, out)
    return out


class SurfaceQuery:
    """Nearest surface points on a fixed triangle mesh.

    Candidate faces come from a k-d tree over face centroids: with ``d0`` the distance to
    the nearest centroid and ``r_max`` the largest centroid-to-corner radius, every face
    closer than ``d0`` has its centroid within ``d0 + r_max``.
    """

    def __init__(self, mesh: TriMesh) -> None:
        if mesh.n_faces == 0:
            raise NoCorrespondences("Target mesh has no faces")
        self.mesh = mesh
        self.tri = mesh.triangles
        self.centroids = self.tri.mean(axis=1)
        self.r_max = float(np.linalg.norm(self.tri - self.centroids[:, None], axis=2).max())
        self.tree = cKDTree(self.centroids)

    def closest(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(closest points (N, 3), distances (N,), face ids (N,))``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        d0, _ = self.tree.query(pts)
        candidates = self.tree.query_ball_point(pts, d0 + self.r_max + 1e-9)
        counts = np.array([len(c) for c in candidates])
        owner = np.repeat(np.arange(len(pts)), counts)
        faces = np.fromiter(
            (f for group in candidates for f in sorted(group)), dtype=np.int64, count=counts.sum()
        )
        tri = self.tri[faces]
        cp = closest_point_on_triangles(pts[owner], tri[:, 0], tri[:, 1], tri[:, 2])
        dist = np.linalg.norm(cp - pts[owner], axis=1)

        order = np.lexsort((dist, owner))
        first = np.ones(len(order), dtype=bool)
        first[1:] = owner[order][1:] != owner[order][:-1]
        best = order[first]
        return cp[best], dist[best], faces[best]


@dataclass(frozen=True)
class MeshScanError:
    """Per-vertex point-to-surface distances (mm) with summary statistics."""

    distances: np.ndarray
    mean: float
    median: float
    p95: float
    region_mask: np.ndarray | None = None

    def to_dict(self) -> dict[str, float | int]:
        return {
            "mean_mm": self.mean,
            "median_mm": self.median,
            "p95_mm": self.p95,
            "n_vertices": int(
                self.distances.size if self.region_mask is None else self.region_mask.sum()
            ),
        }


def mesh_to_scan_error(
    mesh: TriMesh, scan: TriMesh, region_mask: np.ndarray | None = None
) -> MeshScanError:
    """Distance of every mesh vertex to the scan surface.

    ``region_mask`` restricts the summary statistics to a subset of vertices; the
    per-vertex distances always cover the whole mesh.
    """
    _, dist, _ = SurfaceQuery(scan).closest(mesh.vertices)
    sel = dist if region_mask is None else dist[np.asarray(region_mask, dtype=bool)]
    if sel.size == 0:
        nan = float("nan")
        return MeshScanError(dist, nan, nan, nan, region_mask)
    return MeshScanError(
        distances=dist,
        mean=float(sel.mean()),
        median=float(np.median(sel)),
        p95=float(np.percentile(sel, 95)),
        region_mask=None if region_mask is None else np.asarray(region_mask, dtype=bool),
    )

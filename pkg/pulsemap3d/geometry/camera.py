"""Camera construction helpers (OpenCV convention: x right, y down, z forward)."""

from __future__ import annotations

import numpy as np

from ..core.errors import PreconditionError
from ..models import CameraParams


def look_at(
    eye: np.ndarray, target: np.ndarray, up: np.ndarray = np.array([0.0, 1.0, 0.0])
) -> np.ndarray:
    """World-to-camera 4x4 transform of a camera at ``eye`` looking at ``target``.

    ``up`` is the world direction that should appear upwards in the image.
    """
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    norm = np.linalg.norm(z)
    if norm == 0:
        raise PreconditionError("Camera eye and target coincide")
    z /= norm
    down = -(np.asarray(up, dtype=float) - np.dot(up, z) * z)
    if np.linalg.norm(down) < 1e-12:
        raise PreconditionError("Up vector is parallel to the viewing direction")
    y = down / np.linalg.norm(down)
    x = np.cross(y, z)
    m = np.eye(4)
    m[:3, :3] = np.stack([x, y, z])
    m[:3, 3] = -m[:3, :3] @ eye
    return m


def arc_cameras(
    n_views: int,
    step_deg: float,
    distance_mm: float,
    focal_px: float,
    width: int,
    height: int,
    target: np.ndarray = np.zeros(3),
) -> list[CameraParams]:
    """Cameras on a horizontal arc around ``target``, centred on the +z direction.

    View ``i`` sits at azimuth ``(i - (n_views - 1) / 2) * step_deg``.
    """
    cams = []
    target = np.asarray(target, dtype=float)
    for i in range(n_views):
        az = np.deg2rad((i - (n_views - 1) / 2.0) * step_deg)
        eye = target + distance_mm * np.array([np.sin(az), 0.0, np.cos(az)])
        cams.append(
            CameraParams(
                fx=focal_px,
                fy=focal_px,
                cx=(width - 1) / 2.0,
                cy=(height - 1) / 2.0,
                width=width,
                height=height,
                world_to_cam=look_at(eye, target),
                view_id=i,
            )
        )
    return cams


def pixel_grid(width: int, height: int) -> np.ndarray:
    """Pixel centres ``(H, W, 2)`` as (x, y); pixel (row i, col j) sits at (j, i)."""
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    return np.stack([xs, ys], axis=-1)

"""Camera rigs and 2D landmarks as JSON."""

from __future__ import annotations

import json
from collections.abc import Iterable
from typing import Any, TextIO

import numpy as np

from ..core.errors import CorruptFileError
from ..models import CameraParams

CAMERA_KEYS = ("view_id", "fx", "fy", "cx", "cy", "width", "height", "world_to_cam")


def camera_to_dict(cam: CameraParams) -> dict[str, Any]:
    return {
        "view_id": int(cam.view_id),
        "fx": float(cam.fx),
        "fy": float(cam.fy),
        "cx": float(cam.cx),
        "cy": float(cam.cy),
        "width": int(cam.width),
        "height": int(cam.height),
        "world_to_cam": [float(x) for x in cam.world_to_cam.ravel()],
    }


def read_cameras(fp: TextIO) -> list[CameraParams]:
    """Read a JSON array of cameras, sorted by ``view_id``.

    Raises:
        CorruptFileError: If the document is not a list of complete camera records.
    """
    try:
        data = json.load(fp)
    except json.JSONDecodeError as e:
        raise CorruptFileError(f"Camera file is not valid JSON: {e}") from e
    if not isinstance(data, list):
        raise CorruptFileError("Camera JSON must be a list of cameras")
    cams: list[CameraParams] = []
    for row in data:
        try:
            m = np.asarray(row["world_to_cam"], dtype=float)
            if m.size != 16:
                raise CorruptFileError(f"world_to_cam needs 16 values, got {m.size}")
            cams.append(
                CameraParams(
                    fx=float(row["fx"]),
                    fy=float(row["fy"]),
                    cx=float(row["cx"]),
                    cy=float(row["cy"]),
                    width=int(row["width"]),
                    height=int(row["height"]),
                    world_to_cam=m.reshape(4, 4),
                    view_id=int(row["view_id"]),
                )
            )
        except (KeyError, TypeError) as e:
            raise CorruptFileError(f"Missing or invalid key in camera record: {e}") from e
    return sorted(cams, key=lambda c: c.view_id)


def write_cameras(fp: TextIO, cams: Iterable[CameraParams]) -> None:
    json.dump([camera_to_dict(c) for c in cams], fp, indent=2, sort_keys=True)
    fp.write("\n")


def read_landmarks(fp: TextIO) -> dict[int, np.ndarray]:
    """Read 2D landmarks per view; ``null`` points become NaN rows.

    Accepts a single ``{view_id, points}`` object or a list of them.
    """
    try:
        data = json.load(fp)
    except json.JSONDecodeError as e:
        raise CorruptFileError(f"Landmark file is not valid JSON: {e}") from e
    entries = data if isinstance(data, list) else [data]
    out: dict[int, np.ndarray] = {}
    for entry in entries:
        try:
            pts = [
                [np.nan, np.nan] if p is None else [float(p[0]), float(p[1])]
                for p in entry["points"]
            ]
            out[int(entry["view_id"])] = np.asarray(pts, dtype=float).reshape(-1, 2)
        except (KeyError, TypeError, IndexError) as e:
            raise CorruptFileError(f"Invalid landmark record: {e}") from e
    return out


def write_landmarks(fp: TextIO, landmarks: dict[int, np.ndarray]) -> None:
    payload = [
        {
            "view_id": int(view),
            "points": [
                [round(float(p[0]), 6), round(float(p[1]), 6)] if np.all(np.isfinite(p)) else None
                for p in pts
            ],
        }
        for view, pts in sorted(landmarks.items())
    ]
    json.dump(payload, fp, indent=2, sort_keys=True)
    fp.write("\n")

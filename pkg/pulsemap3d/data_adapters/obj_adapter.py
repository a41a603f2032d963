"""Wavefront OBJ meshes through trimesh.

trimesh stores one texture coordinate per vertex, so UV seams come back as duplicated
vertices. Reading merges corners by position and by texture coordinate again so a mesh keeps
separate vertex and UV index buffers; writing splits them per ``(vertex, uv)`` pair.
"""

from __future__ import annotations

import io
import logging
from typing import TextIO

import numpy as np
import trimesh

from ..core.errors import CorruptFileError
from ..core.logging import get_logger, log_with_context
from ..models import TriMesh

logger = get_logger("data_adapters.obj")

OBJ_DIGITS = 8


def _first_seen(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique rows in order of first appearance and the index of every row into them."""
    uniq, first, inverse = np.unique(rows, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return uniq[order], rank[inverse.reshape(-1)]


def _as_trimesh(loaded: object) -> trimesh.Trimesh:
    if isinstance(loaded, trimesh.Scene):
        parts = [g for g in loaded.geometry.values() if isinstance(g, trimesh.Trimesh)]
        if not parts:
            raise CorruptFileError("OBJ file has no faces")
        loaded = parts[0] if len(parts) == 1 else trimesh.util.concatenate(parts)
    if not isinstance(loaded, trimesh.Trimesh):
        raise CorruptFileError("OBJ file has no faces")
    return loaded


def read_obj(fp: TextIO) -> TriMesh:
    """Read a triangle or polygon mesh; polygons are triangulated.

    Raises:
        CorruptFileError: On unparseable records or a file without faces.
    """
    data = io.BytesIO(fp.read().encode("utf-8"))
    try:
        loaded = trimesh.load(data, file_type="obj", process=False, maintain_order=True)
    except (ValueError, IndexError, KeyError, TypeError) as e:
        raise CorruptFileError(f"Unreadable OBJ: {e}") from e
    mesh = _as_trimesh(loaded)
    if len(mesh.vertices) == 0 or len(mesh.faces) == 0:
        raise CorruptFileError("OBJ file has no vertices or no faces")

    corners = np.asarray(mesh.vertices, dtype=float)[mesh.faces].reshape(-1, 3)
    vertices, vert_idx = _first_seen(corners)
    uv = getattr(mesh.visual, "uv", None)
    uv_coords = face_uvs = None
    if uv is not None and len(uv) == len(mesh.vertices):
        uv_coords, uv_idx = _first_seen(np.asarray(uv, dtype=float)[mesh.faces].reshape(-1, 2))
        face_uvs = uv_idx.reshape(-1, 3)
    log_with_context(
        logger,
        logging.DEBUG,
        "OBJ read",
        vertices=len(vertices),
        faces=len(mesh.faces),
        has_uvs=uv_coords is not None,
    )
    return TriMesh(
        vertices=vertices,
        faces=vert_idx.reshape(-1, 3),
        uv_coords=uv_coords,
        face_uvs=face_uvs,
    )


def write_obj(fp: TextIO, mesh: TriMesh) -> None:
    if mesh.uv_coords is not None and mesh.face_uvs is not None:
        pairs = np.stack([mesh.faces.reshape(-1), mesh.face_uvs.reshape(-1)], axis=1)
        uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
        out = trimesh.Trimesh(
            vertices=mesh.vertices[uniq[:, 0]],
            faces=inverse.reshape(-1, 3),
            visual=trimesh.visual.TextureVisuals(uv=mesh.uv_coords[uniq[:, 1]]),
            process=False,
        )
    else:
        out = trimesh.Trimesh(vertices=mesh.vertices, faces=mesh.faces, process=False)
    fp.write(
        trimesh.exchange.obj.export_obj(
            out,
            include_normals=False,
            include_color=False,
            include_texture=True,
            write_texture=False,
            digits=OBJ_DIGITS,
        )
    )

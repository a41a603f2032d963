"""Binary container for morphable models.

Byte layout (all integers little-endian)::

    offset 0   4 bytes   magic b"P3MM"
    offset 4   uint32    header length H
    offset 8   H bytes   UTF-8 JSON header
    offset 8+H           data blocks, back to back, in header order

The header holds ``format_version``, ``n_vertices``, ``n_faces``, ``n_beta``, ``n_psi``,
``n_theta``, ``joint_names``, ``joint_parents``, the landmark map
(``{"<landmark id>": <vertex id>}``) and ``blocks``: a list of
``{name, dtype, shape, offset, nbytes}`` where ``offset`` counts from the first data byte.
Float blocks are ``<f4`` and index blocks ``<u4``, row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..core.errors import CorruptFileError
from ..models import MorphableModel

MAGIC = b"P3MM"
FORMAT_VERSION = 1

_FLOAT_BLOCKS = (
    "mean_vertices",
    "shape_basis",
    "expression_basis",
    "joints",
    "skin_weights",
    "uv_coords",
)
_INDEX_BLOCKS = ("faces", "face_uvs")


def encode_model(model: MorphableModel) -> bytes:
    blocks: list[dict[str, object]] = []
    payload = bytearray()
    for name in _FLOAT_BLOCKS + _INDEX_BLOCKS:
        dtype = "<f4" if name in _FLOAT_BLOCKS else "<u4"
        arr = np.ascontiguousarray(getattr(model, name), dtype=dtype)
        blocks.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": arr.nbytes,
            }
        )
        payload += arr.tobytes()
    header = {
        "format_version": FORMAT_VERSION,
        "n_vertices": model.n_vertices,
        "n_faces": int(model.faces.shape[0]),
        "n_beta": model.n_beta,
        "n_psi": model.n_psi,
        "n_theta": model.n_theta,
        "joint_names": list(model.joint_names),
        "joint_parents": [int(p) for p in model.joint_parents],
        "landmarks": {str(i): int(v) for i, v in enumerate(model.landmark_vertex_ids)},
        "blocks": blocks,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(head)) + head + bytes(payload)


def decode_model(data: bytes) -> MorphableModel:
    """Parse a container produced by :func:`encode_model`.

    Raises:
        CorruptFileError: On a bad magic, truncated data or an inconsistent header.
    """
    if len(data) < 8 or data[:4] != MAGIC:
        raise CorruptFileError("Not a morphable-model container (bad magic)")
    (h_len,) = struct.unpack("<I", data[4:8])
    if 8 + h_len > len(data):
        raise CorruptFileError("Truncated model header")
    try:
        header = json.loads(data[8 : 8 + h_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptFileError(f"Invalid model header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CorruptFileError(f"Unsupported model format version {header.get('format_version')}")

    body = memoryview(data)[8 + h_len :]
    arrays: dict[str, np.ndarray] = {}
    try:
        for blk in header["blocks"]:
            start, nbytes = int(blk["offset"]), int(blk["nbytes"])
            if start + nbytes > len(body):
                raise CorruptFileError(f"Block {blk['name']} runs past the end of the file")
            arr = np.frombuffer(body[start : start + nbytes], dtype=blk["dtype"])
            arrays[blk["name"]] = arr.reshape(blk["shape"])
        landmarks = header["landmarks"]
        lmk = np.array([landmarks[str(i)] for i in range(len(landmarks))], dtype=np.int64)
        model = MorphableModel(
            mean_vertices=arrays["mean_vertices"].astype(float),
            shape_basis=arrays["shape_basis"].astype(float),
            expression_basis=arrays["expression_basis"].astype(float),
            joints=arrays["joints"].astype(float),
            joint_parents=np.asarray(header["joint_parents"], dtype=np.int64),
            skin_weights=arrays["skin_weights"].astype(float),
            faces=arrays["faces"].astype(np.int64),
            uv_coords=arrays["uv_coords"].astype(float),
            face_uvs=arrays["face_uvs"].astype(np.int64),
            landmark_vertex_ids=lmk,
            joint_names=tuple(header["joint_names"]),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise CorruptFileError(f"Inconsistent model container: {e}") from e
    if model.n_beta != header["n_beta"] or model.n_psi != header["n_psi"]:
        raise CorruptFileError("Basis sizes disagree with the header")
    return model


def write_model(path: str | Path, model: MorphableModel) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(encode_model(model))


def read_model(path: str | Path) -> MorphableModel:
    return decode_model(Path(path).read_bytes())

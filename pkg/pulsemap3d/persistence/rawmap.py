"""Raw float32 maps with JSON sidecars.

A map ``<base>.f32`` holds ``height * width`` little-endian float32 values, row-major, NaN
where invalid. ``<base>.json`` describes it. Sidecars are written with sorted keys and no
timestamps so that reruns with the same inputs produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import __version__
from ..core.errors import CorruptFileError
from ..models import MAP_UNITS, UvTextureMap

SIDECAR_KEYS = (
    "width",
    "height",
    "semantic",
    "k",
    "view_id",
    "units",
    "tool_version",
    "manifest_hash",
    "seed",
)


@dataclass(frozen=True)
class Provenance:
    """Run identity copied into every sidecar."""

    manifest_hash: str = ""
    seed: int = 0
    tool_version: str = __version__


@dataclass(frozen=True)
class RawMap:
    values: np.ndarray
    semantic: str
    k: int | None = None
    view_id: int | None = None
    provenance: Provenance = field(default_factory=Provenance)
    extra: dict[str, Any] = field(default_factory=dict)

    def sidecar(self) -> dict[str, Any]:
        h, w = self.values.shape
        meta: dict[str, Any] = dict(self.extra)
        meta.update(
            {
                "width": int(w),
                "height": int(h),
                "semantic": self.semantic,
                "k": self.k,
                "view_id": self.view_id,
                "units": units_of(self.semantic),
                "tool_version": self.provenance.tool_version,
                "manifest_hash": self.provenance.manifest_hash,
                "seed": int(self.provenance.seed),
            }
        )
        return meta


def units_of(semantic: str) -> str:
    base = semantic.removeprefix("gt_").removesuffix("_confidence")
    if semantic.endswith("_confidence"):
        return "1"
    return MAP_UNITS.get(base, "1")


def _paths(base: str | Path) -> tuple[Path, Path]:
    b = Path(base)
    return b.with_name(b.name + ".f32"), b.with_name(b.name + ".json")


def dump_sidecar(path: Path, meta: dict[str, Any]) -> None:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_map(base: str | Path, raw: RawMap) -> Path:
    """Write ``<base>.f32`` and ``<base>.json``; returns the data path."""
    values = np.asarray(raw.values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"Map must be 2-D, got shape {values.shape}")
    data_path, meta_path = _paths(base)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    data_path.write_bytes(np.ascontiguousarray(values, dtype="<f4").tobytes())
    dump_sidecar(meta_path, raw.sidecar())
    return data_path


def read_map(base: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    """Read a map written by :func:`write_map` as float64 plus its sidecar.

    Raises:
        FileNotFoundError: If either file is missing.
        CorruptFileError: If the sidecar is malformed or disagrees with the data size.
    """
    data_path, meta_path = _paths(base)
    for p in (data_path, meta_path):
        if not p.is_file():
            raise FileNotFoundError(str(p))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        width, height = int(meta["width"]), int(meta["height"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CorruptFileError(f"Invalid map sidecar {meta_path}: {e}") from e
    data = data_path.read_bytes()
    if len(data) != 4 * width * height:
        raise CorruptFileError(
            f"{data_path} holds {len(data)} bytes, expected {4 * width * height}"
        )
    values = np.frombuffer(data, dtype="<f4").reshape(height, width).astype(float)
    return values, meta


def write_texture(base: str | Path, tex: UvTextureMap, provenance: Provenance) -> Path:
    """Store a baked texture's value grid plus per-texel view counts and confidence.

    The per-texel view count goes to ``<base>_views``; phase textures also get
    ``<base>_confidence`` (mean phasor magnitude).
    """
    extra = {"resolution": tex.resolution, "kind": "texture"}
    extra.update({k: v for k, v in tex.meta.items() if isinstance(v, (int, float, str))})
    path = write_map(base, RawMap(tex.value, tex.semantic, provenance=provenance, extra=extra))
    b = Path(base)
    write_map(
        b.with_name(b.name + "_views"),
        RawMap(tex.n_views.astype(float), f"{tex.semantic}_views", provenance=provenance),
    )
    if tex.is_phase:
        write_map(
            b.with_name(b.name + "_confidence"),
            RawMap(tex.confidence, f"{tex.semantic}_confidence", provenance=provenance),
        )
    return path


def read_texture(base: str | Path) -> UvTextureMap:
    """Load a texture written by :func:`write_texture` (or any square map) for aggregation."""
    values, meta = read_map(base)
    if values.shape[0] != values.shape[1]:
        raise CorruptFileError(f"Texture {base} is not square: {values.shape}")
    semantic = str(meta.get("semantic", ""))
    tex = UvTextureMap.from_values(values, semantic)
    b = Path(base)
    views_base = b.with_name(b.name + "_views")
    if _paths(views_base)[0].is_file():
        views, _ = read_map(views_base)
        n_views = np.where(np.isfinite(values), np.rint(views), 0).astype(np.int64)
        tex = UvTextureMap(
            semantic=semantic,
            resolution=tex.resolution,
            accum=tex.accum,
            weight_sum=tex.weight_sum,
            n_views=np.maximum(n_views, tex.n_views),
            meta={"source": str(b)},
        )
    return tex

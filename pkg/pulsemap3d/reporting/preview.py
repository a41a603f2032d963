"""False-colour PNG previews of maps and textures with fixed colour scales."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from ..data_adapters.image_adapter import write_image

# (lo, hi, OpenCV colormap) per semantic; amplitude and diffuse scale to their 98th percentile
PREVIEW_SCALES: dict[str, tuple[float, float, int]] = {
    "snr": (0.0, 10.0, cv2.COLORMAP_VIRIDIS),
    "hr": (0.5, 10.0 / 3.0, cv2.COLORMAP_JET),
    "phase": (-np.pi, np.pi, cv2.COLORMAP_TWILIGHT),
}


def preview_scale(semantic: str, values: np.ndarray) -> tuple[float, float, int]:
    base = semantic.removeprefix("gt_")
    if base.startswith("phase"):
        return PREVIEW_SCALES["phase"]
    if base in PREVIEW_SCALES:
        return PREVIEW_SCALES[base]
    finite = values[np.isfinite(values)]
    hi = float(np.percentile(finite, 98)) if finite.size else 1.0
    return 0.0, hi if hi > 0 else 1.0, cv2.COLORMAP_INFERNO


def render_preview(values: np.ndarray, semantic: str) -> np.ndarray:
    """RGB uint8 image of a map; undefined pixels are black."""
    v = np.asarray(values, dtype=float)
    lo, hi, cmap = preview_scale(semantic, v)
    ok = np.isfinite(v)
    scaled = np.clip((np.where(ok, v, lo) - lo) / (hi - lo), 0.0, 1.0)
    gray = np.rint(scaled * 255).astype(np.uint8)
    bgr = cv2.applyColorMap(gray, cmap)
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    rgb[~ok] = 0
    return rgb


def write_preview(path: str | Path, values: np.ndarray, semantic: str) -> Path:
    p = Path(path)
    write_image(p, render_preview(values, semantic))
    return p

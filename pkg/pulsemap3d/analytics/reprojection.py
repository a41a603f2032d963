"""Reprojection error of baked textures against the per-view maps they came from."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from ..core.errors import DimensionMismatch, NoValidPixels
from ..core.logging import get_logger, log_with_context
from ..geometry.raster import rasterize
from ..geometry.texture import reproject
from ..models import CameraParams, SkinMask, TriMesh, UvTextureMap
from .circular import circular_difference

logger = get_logger("analytics.reprojection")


@dataclass(frozen=True)
class ViewReprojection:
    view_id: int
    rms_full: float
    rms_skin: float
    n_full: int
    n_skin: int
    error_map: np.ndarray

    def row(self) -> dict[str, object]:
        return {"view_id": self.view_id, "rms_full": self.rms_full, "rms_skin": self.rms_skin}


@dataclass(frozen=True)
class ReprojectionReport:
    """Per-view RMS of ``|reprojected - source|`` (circular difference for phase)."""

    semantic: str
    views: tuple[ViewReprojection, ...]

    @property
    def view_ids(self) -> list[int]:
        return [v.view_id for v in self.views]

    @property
    def rms_full(self) -> np.ndarray:
        return np.array([v.rms_full for v in self.views])

    @property
    def rms_skin(self) -> np.ndarray:
        return np.array([v.rms_skin for v in self.views])

    def rows(self) -> list[dict[str, object]]:
        return [v.row() for v in self.views]

    def to_dict(self) -> dict[str, object]:
        return {
            "semantic": self.semantic,
            "views": [
                {**v.row(), "n_full": v.n_full, "n_skin": v.n_skin} for v in self.views
            ],
        }


def _rms(err: np.ndarray, sel: np.ndarray) -> float:
    if not sel.any():
        return float("nan")
    return float(np.sqrt(np.mean(err[sel] ** 2)))


def reprojection_error(
    tex: UvTextureMap,
    mesh: TriMesh,
    cams: Sequence[CameraParams],
    source_maps: Mapping[int, np.ndarray],
    masks: Mapping[int, SkinMask] | None = None,
) -> ReprojectionReport:
    """Reproject ``tex`` into every camera and compare with that view's source map.

    Pixels count when both the reprojection and the source are finite; the skin-only RMS
    further restricts them to the view's mask. A view without valid pixels reports NaN.

    Raises:
        NoValidPixels: If no view has a single valid pixel.
        DimensionMismatch: If a source map does not match its camera's image size.
    """
    results: list[ViewReprojection] = []
    for cam in cams:
        if cam.view_id not in source_maps:
            continue
        src = np.asarray(source_maps[cam.view_id], dtype=float)
        if src.shape != (cam.height, cam.width):
            raise DimensionMismatch(
                f"View {cam.view_id}: map {src.shape} vs image {(cam.height, cam.width)}"
            )
        rendered = reproject(tex, mesh, cam, rasterize(mesh, cam))
        valid = np.isfinite(rendered) & np.isfinite(src)
        err = np.full(src.shape, np.nan)
        if tex.is_phase:
            err[valid] = circular_difference(rendered[valid], src[valid])
        else:
            err[valid] = np.abs(rendered[valid] - src[valid])
        skin = valid
        if masks is not None and cam.view_id in masks:
            skin = valid & masks[cam.view_id].values
        results.append(
            ViewReprojection(
                view_id=cam.view_id,
                rms_full=_rms(err, valid),
                rms_skin=_rms(err, skin),
                n_full=int(valid.sum()),
                n_skin=int(skin.sum()),
                error_map=err,
            )
        )
    if not any(v.n_full for v in results):
        raise NoValidPixels(f"No view has valid pixels for {tex.semantic}")
    log_with_context(
        logger,
        logging.INFO,
        "Reprojection evaluated",
        semantic=tex.semantic,
        views=len(results),
        median_rms=round(float(np.nanmedian([v.rms_full for v in results])), 6),
    )
    return ReprojectionReport(semantic=tex.semantic, views=tuple(results))

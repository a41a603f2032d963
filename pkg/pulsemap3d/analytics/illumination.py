"""Correlation of per-view maps and of the lifted texture with ground truth.

Under view-anchored highlights every single view is biased somewhere; the multi-view
texture should track the ground truth more closely than any one view.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from ..core.errors import ConstantInput, PreconditionError
from ..core.logging import get_logger, log_with_context
from ..models import SkinMask
from .stats import pearson

logger = get_logger("analytics.illumination")


@dataclass(frozen=True)
class IlluminationReport:
    semantic: str
    truth: str
    per_view_r: dict[int, float]
    baked_r: float

    @property
    def best_view_r(self) -> float:
        finite = [r for r in self.per_view_r.values() if np.isfinite(r)]
        return max(finite) if finite else float("nan")

    @property
    def texture_wins(self) -> bool:
        """True when the texture correlates strictly better than every single view."""
        return bool(np.isfinite(self.baked_r) and self.baked_r > self.best_view_r)

    def to_dict(self) -> dict[str, object]:
        return {
            "semantic": self.semantic,
            "truth": self.truth,
            "per_view_r": {str(k): v for k, v in sorted(self.per_view_r.items())},
            "baked_r": self.baked_r,
            "best_view_r": self.best_view_r,
            "texture_wins": self.texture_wins,
        }


def _safe_pearson(x: np.ndarray, y: np.ndarray) -> float:
    try:
        return pearson(x, y)
    except (ConstantInput, PreconditionError):
        return float("nan")


def illumination_report(
    view_maps: Mapping[int, np.ndarray],
    truth_maps: Mapping[int, np.ndarray],
    baked: np.ndarray,
    truth_texture: np.ndarray,
    *,
    masks: Mapping[int, SkinMask] | None = None,
    semantic: str = "snr",
    truth: str = "gt_amp",
) -> IlluminationReport:
    """Pearson r of every view map and of the baked texture against ground truth.

    Views whose correlation is undefined (too few pixels, constant values) report NaN.
    """
    per_view: dict[int, float] = {}
    for view_id, values in sorted(view_maps.items()):
        if view_id not in truth_maps:
            continue
        v = np.asarray(values, dtype=float)
        if masks is not None and view_id in masks:
            v = np.where(masks[view_id].values, v, np.nan)
        per_view[view_id] = _safe_pearson(v, truth_maps[view_id])
    baked_r = _safe_pearson(baked, truth_texture)
    report = IlluminationReport(semantic, truth, per_view, baked_r)
    log_with_context(
        logger,
        logging.INFO,
        "Illumination report",
        semantic=semantic,
        baked_r=round(baked_r, 4) if np.isfinite(baked_r) else None,
        best_view_r=round(report.best_view_r, 4) if np.isfinite(report.best_view_r) else None,
        texture_wins=report.texture_wins,
    )
    return report

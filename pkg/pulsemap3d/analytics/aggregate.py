"""Cross-subject aggregation of baked textures."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..core.errors import PreconditionError
from ..core.logging import get_logger, log_with_context
from ..geometry.texture import check_compatible
from ..models import UvTextureMap
from .circular import mean_resultant

logger = get_logger("analytics.aggregate")

MIN_VALID_FRACTION = 0.5


@dataclass(frozen=True)
class TextureAggregate:
    """Per-texel mean and spread; texels valid in too few subjects are NaN."""

    semantic: str
    mean: np.ndarray
    std: np.ndarray
    n_valid: np.ndarray
    n_subjects: int


def aggregate_textures(
    textures: Sequence[UvTextureMap],
    semantic: str | None = None,
    min_valid_fraction: float = MIN_VALID_FRACTION,
) -> TextureAggregate:
    """Mean and population std per texel over subjects.

    Phase textures use the circular mean and the circular std ``sqrt(-2 ln R)`` with ``R``
    the mean resultant length of the subjects' phasors.

    Raises:
        PreconditionError: With fewer than two textures.
        SemanticMismatch: If resolutions or semantics differ.
    """
    if len(textures) < 2:
        raise PreconditionError(f"Aggregation needs at least 2 textures, got {len(textures)}")
    check_compatible(textures, semantic)
    sem = semantic or textures[0].semantic
    stack = np.stack([t.value for t in textures])
    valid = np.isfinite(stack)
    n_valid = valid.sum(axis=0)
    keep = n_valid >= min_valid_fraction * len(textures)
    keep &= n_valid > 0

    if textures[0].is_phase:
        mean, r = mean_resultant(stack, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            std = np.sqrt(-2.0 * np.log(np.minimum(r, 1.0)))
    else:
        safe = np.where(valid, stack, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = safe.sum(axis=0) / n_valid
            var = (np.where(valid, stack - mean, 0.0) ** 2).sum(axis=0) / n_valid
        std = np.sqrt(var)
    mean = np.where(keep, mean, np.nan)
    std = np.where(keep, std, np.nan)
    log_with_context(
        logger,
        logging.INFO,
        "Textures aggregated",
        semantic=sem,
        subjects=len(textures),
        valid_fraction=round(float(keep.mean()), 4),
    )
    return TextureAggregate(sem, mean, std, n_valid.astype(np.int64), len(textures))

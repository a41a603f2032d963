"""Correlation, dependency and rank statistics over map values."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy import stats

from ..core.errors import ConstantInput, LengthMismatch, PreconditionError

MIN_PEARSON_PAIRS = 3
MIN_DEPENDENCY_PAIRS = 5


def paired_valid(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flatten both inputs and drop pairs where either member is NaN or infinite."""
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"Cannot pair {a.size} values with {b.size} values")
    ok = np.isfinite(a) & np.isfinite(b)
    return a[ok], b[ok]


def _pearsonr(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise ConstantInput("Correlation is undefined for constant input")
    r, p = stats.pearsonr(a, b)
    return float(np.clip(r, -1.0, 1.0)), float(p)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation over the valid pairs of ``x`` and ``y``.

    Raises:
        PreconditionError: If fewer than three valid pairs remain.
        ConstantInput: If either side is constant over the valid pairs.
    """
    a, b = paired_valid(x, y)
    if a.size < MIN_PEARSON_PAIRS:
        raise PreconditionError(f"Pearson needs at least {MIN_PEARSON_PAIRS} pairs, got {a.size}")
    return _pearsonr(a, b)[0]


@dataclass(frozen=True)
class DependencyResult:
    r: float
    p: float
    n: int
    relevant: bool

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


def dependency_analysis(
    errors_a: np.ndarray,
    errors_b: np.ndarray,
    *,
    alpha: float = 0.05,
    min_abs_r: float = 0.2,
) -> DependencyResult:
    """Pearson r and its two-sided p-value (t distribution, n - 2 degrees of freedom).

    A dependency is relevant when ``p < alpha`` and ``|r| > min_abs_r``.

    Raises:
        LengthMismatch: If the series differ in length.
        PreconditionError: If fewer than five valid pairs remain.
        ConstantInput: If either series is constant.
    """
    a, b = paired_valid(errors_a, errors_b)
    n = int(a.size)
    if n < MIN_DEPENDENCY_PAIRS:
        raise PreconditionError(f"Dependency analysis needs n >= {MIN_DEPENDENCY_PAIRS}, got {n}")
    r, p = _pearsonr(a, b)
    return DependencyResult(r=r, p=p, n=n, relevant=bool(p < alpha and abs(r) > min_abs_r))


@dataclass(frozen=True)
class RankTestResult:
    u: float
    p: float
    n_inside: int
    n_outside: int
    median_inside: float
    median_outside: float
    alternative: str

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p < alpha

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


def rank_test(
    inside: np.ndarray,
    outside: np.ndarray,
    alternative: Literal["greater", "less"] = "greater",
) -> RankTestResult:
    """One-sided Mann-Whitney U test of ``inside`` against ``outside`` (NaNs dropped).

    Raises:
        PreconditionError: If either sample is empty after dropping invalid values.
    """
    a = np.asarray(inside, dtype=float).ravel()
    b = np.asarray(outside, dtype=float).ravel()
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if a.size == 0 or b.size == 0:
        raise PreconditionError("Rank test needs values on both sides")
    res = stats.mannwhitneyu(a, b, alternative=alternative)
    return RankTestResult(
        u=float(res.statistic),
        p=float(res.pvalue),
        n_inside=int(a.size),
        n_outside=int(b.size),
        median_inside=float(np.median(a)),
        median_outside=float(np.median(b)),
        alternative=alternative,
    )

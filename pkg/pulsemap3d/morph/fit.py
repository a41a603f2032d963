"""Robust non-rigid fitting of the morphable model to a scan.

The objective is a sum of squared residuals evaluated in metres:

* data: ``sqrt(lambda_D) * e / sqrt(|e|^2 + sigma^2)`` per model vertex, ``e`` being the
  offset to the closest scan point, so its square is the Geman-McClure loss;
* landmarks: ``sqrt(lambda_L) * (model landmark - scan landmark)``;
* priors: ``sqrt(lambda) * coefficients`` for shape, pose and expression.

Correspondences are refreshed every outer iteration; between refreshes a Gauss-Newton
dogleg trust-region solver minimizes the fixed-correspondence objective. ``sigma`` follows a
graduated schedule, halving from the initial median distance down to ``sigma_gmo``.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import NoCorrespondences, NonFiniteObjective
from ..core.logging import get_logger, log_with_context
from ..models import FitState, FitWeights, MorphableModel, TriMesh
from .align import CleanedScan, clean_scan, rigid_align
from .distance import MeshScanError, SurfaceQuery, mesh_to_scan_error
from .model import ParameterLayout, evaluate_model, model_jacobian, model_vertices

logger = get_logger("morph.fit")

MM_TO_M = 1e-3

ResidualFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def dogleg_step(jac: np.ndarray, res: np.ndarray, delta: float) -> np.ndarray:
    """Powell dogleg step for ``min ||J h + r||`` subject to ``||h|| <= delta``."""
    h_gn = np.linalg.lstsq(jac, -res, rcond=None)[0]
    if np.linalg.norm(h_gn) <= delta:
        return h_gn
    g = jac.T @ res
    g_norm = np.linalg.norm(g)
    if g_norm == 0:
        return np.zeros_like(g)
    jg = jac @ g
    jg2 = float(jg @ jg)
    if jg2 == 0:
        return -delta * g / g_norm
    h_sd = -(g_norm**2 / jg2) * g
    if np.linalg.norm(h_sd) >= delta:
        return -delta * g / g_norm
    d = h_gn - h_sd
    a = float(d @ d)
    b = 2.0 * float(h_sd @ d)
    c = float(h_sd @ h_sd) - delta * delta
    s = (-b + np.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
    return h_sd + s * d


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    history: list[float]
    iterations: int


def dogleg_minimize(
    fun: ResidualFn,
    x0: np.ndarray,
    *,
    max_iter: int = 20,
    rel_tol: float = 1e-8,
    delta0: float | None = None,
) -> SolveResult:
    """Trust-region Gauss-Newton with dogleg steps and adaptive column scaling.

    Only steps that strictly decrease ``||r||^2`` are accepted, so ``history`` is strictly
    decreasing.

    Raises:
        NonFiniteObjective: If the objective at ``x0`` is not finite.
    """
    x = np.asarray(x0, dtype=float).copy()
    r, jac = fun(x)
    f = float(r @ r)
    if not np.isfinite(f):
        raise NonFiniteObjective(f"Objective is not finite at the start point: {f}")
    history = [f]
    scale = np.maximum(np.linalg.norm(jac, axis=0), 1e-12)
    delta = delta0 if delta0 is not None else max(float(np.linalg.norm(scale * x)), 1.0)
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        scale = np.maximum(scale, np.linalg.norm(jac, axis=0))
        step_scaled = dogleg_step(jac / scale, r, delta)
        step = step_scaled / scale
        predicted = f - float(np.sum((r + jac @ step) ** 2))
        if predicted <= 0:
            break
        r_new, jac_new = fun(x + step)
        f_new = float(r_new @ r_new)
        if not np.isfinite(f_new):
            delta *= 0.25
            continue
        rho = (f - f_new) / predicted
        if rho > 0.75 and np.linalg.norm(step_scaled) > 0.99 * delta:
            delta *= 2.0
        elif rho < 0.25:
            delta *= 0.25
        if f_new < f:
            decrease = (f - f_new) / max(f, 1e-300)
            x, r, jac, f = x + step, r_new, jac_new, f_new
            history.append(f)
            if decrease < rel_tol:
                break
        if delta < 1e-14 * (1.0 + float(np.linalg.norm(scale * x))):
            break
    return SolveResult(x=x, objective=f, history=history, iterations=iterations)


@dataclass
class FitObjective:
    """Fixed-correspondence objective over ``[T, beta, theta, psi]``.

    Attributes:
        targets: Closest scan points (mm) for ``vertex_ids``.
        landmark_targets: Scan landmarks (mm) aligned with ``model.landmark_vertex_ids``;
            rows containing NaN are ignored.
    """

    model: MorphableModel
    template: FitState
    vertex_ids: np.ndarray
    targets: np.ndarray
    weights: FitWeights
    sigma: float
    landmark_targets: np.ndarray | None = None
    layout: ParameterLayout = field(init=False)

    def __post_init__(self) -> None:
        self.layout = ParameterLayout.of(self.model)
        self._lmk_rows = np.zeros(0, dtype=np.int64)
        if self.landmark_targets is not None:
            lt = np.asarray(self.landmark_targets, dtype=float).reshape(-1, 3)
            self._lmk_rows = np.flatnonzero(np.isfinite(lt).all(axis=1))
            self.landmark_targets = lt

    def _state(self, p: np.ndarray) -> FitState:
        return self.layout.unpack(np.asarray(p, dtype=float), self.template)

    def residuals_and_jacobian(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fit = self._state(p)
        lay, w = self.layout, self.weights
        world, jac = model_jacobian(self.model, fit, self.vertex_ids)
        e = (world - self.targets) * MM_TO_M
        je = jac * MM_TO_M
        s = np.sqrt((e**2).sum(axis=1) + self.sigma**2)
        c = np.sqrt(w.lambda_D)
        r_data = c * e / s[:, None]
        outer = np.einsum("na,nb->nab", e, e) / (s**3)[:, None, None]
        dr = c * (np.eye(3)[None] / s[:, None, None] - outer)
        j_data = np.einsum("nab,nbk->nak", dr, je)
        blocks_r = [r_data.ravel()]
        blocks_j = [j_data.reshape(-1, lay.size)]

        if self._lmk_rows.size:
            assert self.landmark_targets is not None
            ids = self.model.landmark_vertex_ids[self._lmk_rows]
            lw, lj = model_jacobian(self.model, fit, ids)
            cl = np.sqrt(w.lambda_L) * MM_TO_M
            blocks_r.append((cl * (lw - self.landmark_targets[self._lmk_rows])).ravel())
            blocks_j.append((cl * lj).reshape(-1, lay.size))

        priors = ((lay.beta, w.lambda_beta), (lay.theta, w.lambda_theta), (lay.psi, w.lambda_psi))
        for sl, lam in priors:
            n = sl.stop - sl.start
            if n == 0:
                continue
            jr = np.zeros((n, lay.size))
            jr[:, sl] = np.sqrt(lam) * np.eye(n)
            blocks_r.append(np.sqrt(lam) * np.asarray(p, dtype=float)[sl])
            blocks_j.append(jr)
        return np.concatenate(blocks_r), np.concatenate(blocks_j)

    def residuals(self, p: np.ndarray) -> np.ndarray:
        return self.residuals_and_jacobian(p)[0]

    def value(self, p: np.ndarray) -> float:
        r = self.residuals(p)
        return float(r @ r)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        r, jac = self.residuals_and_jacobian(p)
        return 2.0 * jac.T @ r


def gnc_schedule(initial_m: float, sigma_gmo: float) -> list[float]:
    """Robustifier widths from ``initial_m`` halving down to ``sigma_gmo`` (metres)."""
    sigmas = []
    s = float(initial_m)
    while s > sigma_gmo:
        sigmas.append(s)
        s /= 2.0
    sigmas.append(sigma_gmo)
    return sigmas


@dataclass(frozen=True)
class FitStep:
    sigma: float
    outer: int
    objective_start: float
    objective_end: float
    inner_history: tuple[float, ...]


@dataclass(frozen=True)
class FitResult:
    state: FitState
    objective: float
    steps: tuple[FitStep, ...]
    sigmas: tuple[float, ...]


def nonrigid_fit_detailed(
    model: MorphableModel,
    scan: TriMesh,
    init: FitState,
    w: FitWeights,
    iters: int = 12,
    *,
    scan_landmarks: np.ndarray | None = None,
    inner_iters: int = 20,
    rel_tol: float = 1e-8,
    graduated: bool = True,
    vertex_mask: np.ndarray | None = None,
) -> FitResult:
    """Non-rigid fit with the full iteration record; see :func:`nonrigid_fit`."""
    started = time.perf_counter()
    query = SurfaceQuery(scan)
    vertex_ids = (
        np.arange(model.n_vertices)
        if vertex_mask is None
        else np.flatnonzero(np.asarray(vertex_mask, dtype=bool))
    )
    if vertex_ids.size == 0:
        raise NoCorrespondences("No model vertex selected for the data term")
    layout = ParameterLayout.of(model)
    p = layout.pack(init)

    def world(params: np.ndarray) -> np.ndarray:
        return model_vertices(model, layout.unpack(params, init))[vertex_ids]

    _, d0, _ = query.closest(world(p))
    if not np.all(np.isfinite(d0)):
        raise NonFiniteObjective("Initial model vertices are not finite")
    sigmas = [w.sigma_gmo]
    if graduated:
        sigmas = gnc_schedule(float(np.median(d0)) * MM_TO_M, w.sigma_gmo)

    steps: list[FitStep] = []
    objective = float("nan")
    for sigma in sigmas:
        previous = np.inf
        for outer in range(iters):
            targets, _, _ = query.closest(world(p))
            obj = FitObjective(
                model=model,
                template=init,
                vertex_ids=vertex_ids,
                targets=targets,
                weights=w,
                sigma=sigma,
                landmark_targets=scan_landmarks,
            )
            solved = dogleg_minimize(
                obj.residuals_and_jacobian, p, max_iter=inner_iters, rel_tol=rel_tol
            )
            start_value = solved.history[0]
            # refreshed correspondences are never farther than the previous ones
            if start_value > previous * (1 + 1e-9):
                log_with_context(
                    logger,
                    logging.WARNING,
                    "Objective increased after correspondence update",
                    sigma=sigma,
                    outer=outer,
                    before=previous,
                    after=start_value,
                )
            p = solved.x
            objective = solved.objective
            steps.append(
                FitStep(sigma, outer, start_value, objective, tuple(solved.history))
            )
            if np.isfinite(previous) and previous - objective <= rel_tol * previous:
                break
            previous = objective

    state = layout.unpack(p, init)
    log_with_context(
        logger,
        logging.INFO,
        "Non-rigid fit finished",
        stages=len(sigmas),
        outer_iterations=len(steps),
        objective=objective,
        elapsed_s=round(time.perf_counter() - started, 3),
    )
    return FitResult(state=state, objective=objective, steps=tuple(steps), sigmas=tuple(sigmas))


def nonrigid_fit(
    model: MorphableModel,
    scan: TriMesh,
    init: FitState,
    w: FitWeights,
    iters: int = 12,
    **kwargs: object,
) -> FitState:
    """Fit translation, shape, pose and expression to ``scan``; scale and R stay fixed.

    Args:
        model: Morphable model (mm).
        scan: Cleaned scan in the frame ``init`` maps the model into.
        init: Start state, usually from :func:`rigid_align`.
        w: Objective weights.
        iters: Outer iterations (correspondence refreshes) per robustifier stage.
        **kwargs: ``scan_landmarks``, ``inner_iters``, ``rel_tol``, ``graduated``,
            ``vertex_mask`` as in :func:`nonrigid_fit_detailed`.

    Raises:
        NoCorrespondences: If the scan has no faces or no vertex is selected.
        NonFiniteObjective: If the objective becomes NaN or infinite.
    """
    result = nonrigid_fit_detailed(model, scan, init, w, iters, **kwargs)  # type: ignore[arg-type]
    return result.state


@dataclass(frozen=True)
class ScanFit:
    """Outcome of the full registration in the original scan frame."""

    state: FitState
    mesh: TriMesh
    error: MeshScanError
    rigid_scale: float
    rigid_rotation: np.ndarray
    rigid_translation: np.ndarray
    cleaned: CleanedScan
    objective: float


def fit_scan(
    model: MorphableModel,
    scan: TriMesh,
    scan_landmarks: np.ndarray,
    weights: FitWeights | None = None,
    *,
    iters: int = 12,
    inner_iters: int = 20,
    rel_tol: float = 1e-8,
    region_mask: np.ndarray | None = None,
) -> ScanFit:
    """Clean the scan, align the model on the landmarks, then fit non-rigidly."""
    weights = weights or FitWeights()
    cleaned = clean_scan(scan, scan_landmarks)
    assert cleaned.landmarks is not None
    lmk = cleaned.landmarks
    found = np.isfinite(lmk).all(axis=1)
    src = model.mean_vertices[model.landmark_vertex_ids][found]
    s, rot, trans = rigid_align(src, lmk[found])
    init = FitState(
        scale=s,
        R=rot,
        T=trans,
        beta=np.zeros(model.n_beta),
        theta=np.zeros(model.n_theta),
        psi=np.zeros(model.n_psi),
    )
    result = nonrigid_fit_detailed(
        model,
        cleaned.mesh,
        init,
        weights,
        iters,
        scan_landmarks=lmk,
        inner_iters=inner_iters,
        rel_tol=rel_tol,
    )
    fitted = result.state
    state = FitState(
        scale=fitted.scale,
        R=fitted.R,
        T=fitted.T + cleaned.offset,
        beta=fitted.beta,
        theta=fitted.theta,
        psi=fitted.psi,
    )
    mesh = evaluate_model(model, state)
    error = mesh_to_scan_error(mesh, scan, region_mask)
    log_with_context(
        logger,
        logging.INFO,
        "Scan registered",
        rigid_scale=round(s, 6),
        p95_mm=round(error.p95, 4),
        median_mm=round(error.median, 4),
    )
    return ScanFit(
        state=state,
        mesh=mesh,
        error=error,
        rigid_scale=s,
        rigid_rotation=rot,
        rigid_translation=trans + cleaned.offset,
        cleaned=cleaned,
        objective=result.objective,
    )

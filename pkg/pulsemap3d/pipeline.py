"""Pipeline stages over a subject workspace: maps, fit, bake, eval and report.

Each stage reads the outputs of the previous one from disk and checks for them first, so a
stage can be rerun on its own. Outputs depend only on the inputs, the manifest and the
settings; worker counts change the schedule, never the bytes written.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .analytics.aggregate import aggregate_textures
from .analytics.illumination import illumination_report
from .analytics.reprojection import ReprojectionReport, reprojection_error
from .analytics.stats import dependency_analysis
from .config import AppSettings
from .core.errors import (
    ConstantInput,
    DegenerateReference,
    DimensionMismatch,
    EmptyMask,
    MissingUVs,
    NonPositiveBaseline,
    NoSpectralPeak,
    NoValidPixels,
    PreconditionError,
    PulseMapError,
    SpanMismatch,
)
from .core.logging import get_logger, log_with_context
from .core.orchestrator import StageRunner
from .data_adapters.csv_adapter import read_ppg_csv
from .data_adapters.image_adapter import read_frames, read_mask
from .data_adapters.json_adapter import read_cameras, read_landmarks
from .data_adapters.model_file import read_model
from .data_adapters.obj_adapter import read_obj, write_obj
from .geometry.raster import RasterResult, backproject_landmarks, rasterize
from .geometry.texture import TexelVisibility, bake_views, texel_surface, visible_texels
from .maps.engine import MapOptions, compute_view_maps, diffuse_map, map_summary
from .models import MAP_SEMANTICS, CameraParams, FitWeights, MapRequest, SkinMask, TriMesh
from .morph.fit import fit_scan
from .morph.generic import skin_region
from .persistence.rawmap import RawMap, read_map, read_texture, write_map, write_texture
from .persistence.workspace import Workspace, write_json
from .reporting.ascii import render_summary
from .reporting.preview import write_preview
from .reporting.report import (
    json_safe,
    summarize_views,
    write_csv_reprojection,
    write_json_report,
)
from .signals.pos import validate_reference

logger = get_logger("pipeline")

BAKE_SEMANTICS = (*MAP_SEMANTICS, "diffuse")
EXTRA_MAPS = ("valid", "snr_clamped", "diffuse")
# views that cannot produce a reference are skipped, not fatal
_VIEW_SKIP_ERRORS = (EmptyMask, NoSpectralPeak, DegenerateReference, NonPositiveBaseline)


def map_request(ws: Workspace, k: int | None = None) -> MapRequest:
    m = ws.manifest.maps
    return MapRequest(
        k=k if k is not None else m.k,
        segment_len_s=m.segment_len_s,
        n_segments=m.n_segments,
        total_len_s=m.total_len_s,
    )


def _stage_log(stage: str, ws: Workspace, started: float, **context: Any) -> None:
    log_with_context(
        logger,
        logging.INFO,
        "Stage finished",
        stage=stage,
        subject=ws.manifest.subject,
        elapsed_s=round(time.perf_counter() - started, 3),
        **context,
    )


# maps


def _validate_with_ppg(ws: Workspace, settings: AppSettings, ref: Any) -> dict[str, Any] | None:
    if ws.manifest.paths.ppg is None:
        return None
    if ws.manifest.frames_t0_unix_s is None:
        logger.warning("Contact PPG given but frames_t0_unix_s is unset; validation skipped")
        return None
    with open(ws.require_input("ppg"), encoding="utf-8") as fp:
        rec = read_ppg_csv(fp)
    s = settings.signal
    try:
        report = validate_reference(
            ref,
            rec.to_signal(),
            video_t0_s=ws.manifest.frames_t0_unix_s,
            ppg_t0_s=float(rec.t_unix_s[0]),
            tolerance_bpm=s.ppg_tolerance_bpm,
            hr_range_bpm=(s.hr_min_bpm, s.hr_max_bpm),
            pad_factor=s.pad_factor,
        )
    except (SpanMismatch, NoSpectralPeak) as e:
        return {"error": e.kind, "message": str(e)}
    return {
        "hr_ref_bpm": report.hr_ref_bpm,
        "hr_ppg_bpm": report.hr_ppg_bpm,
        "diff_bpm": report.diff_bpm,
        "tolerance_bpm": report.tolerance_bpm,
        "passed": report.passed,
    }


def maps_for_view(
    ws: Workspace, settings: AppSettings, view_id: int, req: MapRequest, options: MapOptions
) -> dict[str, Any]:
    """Compute and write the pulse maps of one view; returns its summary record."""
    frames = read_frames(ws.frames_dir(view_id), ws.manifest.fps, view_id)
    mask = read_mask(ws.mask_path(view_id))
    prov = ws.provenance()
    s = settings.signal
    try:
        ref, maps = compute_view_maps(
            frames,
            mask,
            req,
            options,
            band_hz=(s.band_lo_hz, s.band_hi_hz),
            min_peak_ratio=s.peak_ratio,
        )
    except _VIEW_SKIP_ERRORS as e:
        log_with_context(
            logger, logging.WARNING, "View skipped", view_id=view_id, error=e.kind, detail=str(e)
        )
        summary: dict[str, Any] = {"view_id": view_id, "status": "skipped", "error": e.kind}
        write_json(ws.map_base(view_id, "summary").with_suffix(".json"), summary)
        return summary

    for semantic in MAP_SEMANTICS:
        write_map(
            ws.map_base(view_id, semantic),
            RawMap(maps.channel(semantic), semantic, k=req.k, view_id=view_id, provenance=prov),
        )
    extras = {
        "valid": maps.valid.astype(float),
        "snr_clamped": (
            maps.snr_clamped if maps.snr_clamped is not None else np.zeros(maps.shape, bool)
        ).astype(float),
        "diffuse": diffuse_map(frames),
    }
    for semantic, values in extras.items():
        write_map(
            ws.map_base(view_id, semantic),
            RawMap(values, semantic, k=req.k, view_id=view_id, provenance=prov),
        )
    write_json(
        ws.map_base(view_id, "reference").with_suffix(".json"),
        json_safe(
            {
                "view_id": view_id,
                "fs": ref.s_ref.fs,
                "hr_ref_hz": ref.hr_ref_hz,
                "peak_ratio": ref.peak_ratio,
                "s_ref": np.round(ref.s_ref.samples, 9),
            }
        ),
    )
    summary = {
        "view_id": view_id,
        "status": "ok",
        "k": req.k,
        "hr_ref_hz": ref.hr_ref_hz,
        "peak_ratio": ref.peak_ratio,
        **map_summary(maps),
    }
    ppg = _validate_with_ppg(ws, settings, ref)
    if ppg is not None:
        summary["ppg_validation"] = ppg
    write_json(ws.map_base(view_id, "summary").with_suffix(".json"), json_safe(summary))
    return summary


def run_maps(
    ws: Workspace, settings: AppSettings, *, k: int | None = None, workers: int | None = None
) -> list[dict[str, Any]]:
    """Pulse maps for every view. Views run in order; rows are split over the workers."""
    started = time.perf_counter()
    req = map_request(ws, k)
    options = MapOptions.from_settings(settings, workers=workers)
    summaries = [maps_for_view(ws, settings, v, req, options) for v in ws.views()]
    ok = [s for s in summaries if s["status"] == "ok"]
    if not ok:
        raise NoValidPixels("No view produced pulse maps")
    _stage_log("maps", ws, started, views=len(summaries), computed=len(ok), k=req.k)
    return summaries


# fit


def _read_mesh(path: Path) -> TriMesh:
    with open(path, encoding="utf-8") as fp:
        return read_obj(fp)


def _read_cameras(ws: Workspace) -> dict[int, CameraParams]:
    with open(ws.require_input("cameras"), encoding="utf-8") as fp:
        return {c.view_id: c for c in read_cameras(fp)}


def scan_landmarks(
    scan: TriMesh, cams: dict[int, CameraParams], landmarks_2d: dict[int, np.ndarray]
) -> np.ndarray:
    """3D landmarks on the scan: each 2D landmark lifted per view, then averaged over views."""
    lifted = []
    for view_id, pts in sorted(landmarks_2d.items()):
        if view_id not in cams:
            continue
        cam = cams[view_id]
        lifted.append(backproject_landmarks(pts, rasterize(scan, cam), scan, cam).points)
    if not lifted:
        raise PreconditionError("No landmark view matches a camera")
    stack = np.stack(lifted)
    counts = np.isfinite(stack).all(axis=2).sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean = np.nansum(stack, axis=0) / counts[:, None]
    return np.where(counts[:, None] > 0, mean, np.nan)


def run_fit(ws: Workspace, settings: AppSettings) -> dict[str, Any]:
    """Register the morphable model to the scan; writes the fitted mesh, state and report."""
    started = time.perf_counter()
    model = read_model(ws.require_input("model"))
    scan = _read_mesh(ws.require_input("scan"))
    cams = _read_cameras(ws)
    with open(ws.require_input("landmarks"), encoding="utf-8") as fp:
        lmk_2d = read_landmarks(fp)
    lmk = scan_landmarks(scan, cams, lmk_2d)
    if len(lmk) != len(model.landmark_vertex_ids):
        raise DimensionMismatch(
            f"{len(lmk)} landmarks given, model defines {len(model.landmark_vertex_ids)}"
        )
    f = settings.fitting
    weights = FitWeights(
        lambda_D=f.lambda_D,
        lambda_L=f.lambda_L,
        lambda_beta=f.lambda_beta,
        lambda_psi=f.lambda_psi,
        lambda_theta=f.lambda_theta,
        sigma_gmo=f.sigma_gmo,
    )
    result = fit_scan(
        model,
        scan,
        lmk,
        weights,
        iters=f.outer_iters,
        inner_iters=f.inner_iters,
        rel_tol=f.rel_tol,
        region_mask=skin_region(model),
    )
    ws.fit_dir.mkdir(parents=True, exist_ok=True)
    with open(ws.fitted_mesh_path, "w", encoding="utf-8") as fp:
        write_obj(fp, result.mesh)
    write_json(ws.fit_state_path, result.state.to_dict())
    report = {
        "subject": ws.manifest.subject,
        "manifest_hash": ws.manifest.content_hash(),
        "landmarks_found": int(np.isfinite(lmk).all(axis=1).sum()),
        "rigid_scale": result.rigid_scale,
        "objective": result.objective,
        "skin_error": result.error.to_dict(),
        "bbox_diagonal_mm": scan.bbox_diagonal(),
        "dropped_faces": int(result.cleaned.dropped_faces),
    }
    write_json(ws.reports_dir / "fit_report.json", json_safe(report))
    _stage_log("fit", ws, started, p95_mm=round(result.error.p95, 4))
    return json_safe(report)


# bake


def bake_mesh(ws: Workspace) -> TriMesh:
    """The fitted mesh when the fit stage is enabled, otherwise the scan itself."""
    if ws.manifest.stages.fit:
        path = ws.require(ws.fitted_mesh_path, "fit")
    else:
        path = ws.require_input("scan")
    mesh = _read_mesh(path)
    if not mesh.has_uvs:
        raise MissingUVs(f"{path} has no texture coordinates")
    return mesh


def _has_map(base: Path) -> bool:
    return base.with_name(base.name + ".f32").is_file()


def _view_maps(ws: Workspace, semantic: str, views: list[int]) -> dict[int, np.ndarray]:
    bases = {v: ws.map_base(v, semantic) for v in views}
    return {v: read_map(b)[0] for v, b in bases.items() if _has_map(b)}


def _computed_views(ws: Workspace) -> list[int]:
    views = [v for v in ws.views() if _has_map(ws.map_base(v, "snr"))]
    if not views:
        raise FileNotFoundError(
            f"No pulse maps under {ws.subject_dir / 'maps'} (run the 'maps' stage first)"
        )
    return views


@dataclass(frozen=True)
class _ViewSampling:
    raster: RasterResult
    visibility: TexelVisibility


def run_bake(
    ws: Workspace, settings: AppSettings, *, workers: int | None = None
) -> dict[str, Any]:
    """Bake every map semantic of all computed views into textures with previews."""
    started = time.perf_counter()
    mesh = bake_mesh(ws)
    cams_by_view = _read_cameras(ws)
    views = [v for v in _computed_views(ws) if v in cams_by_view]
    cams = [cams_by_view[v] for v in views]
    resolution = ws.manifest.texture_resolution
    geo = settings.geometry
    surface = texel_surface(mesh, resolution)

    def sampling(cam: CameraParams) -> _ViewSampling:
        return _ViewSampling(
            rasterize(mesh, cam), visible_texels(surface, mesh, cam, geo.depth_eps_rel)
        )

    runner: StageRunner[CameraParams, _ViewSampling] = StageRunner(
        sampling, workers=workers or settings.runtime.workers, name="visibility"
    )
    samplings = runner.map(cams)
    prov = ws.provenance()
    defined: dict[str, float] = {}
    for semantic in BAKE_SEMANTICS:
        maps = _view_maps(ws, semantic, views)
        if len(maps) != len(views):
            continue
        tex = bake_views(
            [maps[v] for v in views],
            mesh,
            cams,
            semantic,
            resolution,
            weight_mode=geo.view_weight,
            eps_rel=geo.depth_eps_rel,
            surface=surface,
            visibilities=[s.visibility for s in samplings],
            rasters=[s.raster for s in samplings],
        )
        write_texture(ws.texture_base(semantic), tex, prov)
        write_preview(ws.preview_path(semantic), tex.value, semantic)
        defined[semantic] = float(tex.defined.mean())
    _stage_log("bake", ws, started, views=len(views), textures=len(defined))
    return {"views": views, "resolution": resolution, "defined_fraction": defined}


# eval


def _masks(ws: Workspace, views: list[int]) -> dict[int, SkinMask]:
    return {v: read_mask(ws.mask_path(v)) for v in views if ws.mask_path(v).is_file()}


def _dependency(a: np.ndarray, b: np.ndarray) -> dict[str, Any]:
    try:
        return dependency_analysis(a, b).to_dict()
    except (PreconditionError, ConstantInput) as e:
        return {"error": e.kind, "message": str(e)}


def _report_entry(rep: ReprojectionReport) -> dict[str, Any]:
    return {"view_ids": rep.view_ids, "rms_full": rep.rms_full, "rms_skin": rep.rms_skin}


def run_eval(ws: Workspace, settings: AppSettings) -> dict[str, Any]:
    """Reprojection errors, their dependency on the diffuse texture and ground-truth checks."""
    started = time.perf_counter()
    mesh = bake_mesh(ws)
    cams_by_view = _read_cameras(ws)
    views = [v for v in _computed_views(ws) if v in cams_by_view]
    cams = [cams_by_view[v] for v in views]
    masks = _masks(ws, views)

    reports: dict[str, ReprojectionReport] = {}
    for semantic in BAKE_SEMANTICS:
        tex = read_texture(ws.texture_base(semantic))
        rep = reprojection_error(tex, mesh, cams, _view_maps(ws, semantic, views), masks)
        reports[semantic] = rep
        ws.reports_dir.mkdir(parents=True, exist_ok=True)
        with open(ws.reports_dir / f"reprojection_{semantic}.csv", "w", encoding="utf-8") as fp:
            write_csv_reprojection(fp, rep)

    diffuse = reports["diffuse"]
    dependency = {
        sem: {
            "full": _dependency(rep.rms_full, diffuse.rms_full),
            "skin": _dependency(rep.rms_skin, diffuse.rms_full),
        }
        for sem, rep in reports.items()
        if sem != "diffuse"
    }
    summaries = []
    for v in views:
        path = ws.map_base(v, "summary").with_suffix(".json")
        if path.is_file():
            summaries.append(json.loads(path.read_text(encoding="utf-8")))
    evaluation: dict[str, Any] = {
        "subject": ws.manifest.subject,
        "manifest_hash": ws.manifest.content_hash(),
        "seed": ws.manifest.seed,
        "maps": summarize_views(s for s in summaries if s.get("status") == "ok"),
        "reprojection": {sem: _report_entry(rep) for sem, rep in reports.items()},
        "dependency": {sem: d["full"] for sem, d in dependency.items()},
        "dependency_skin": {sem: d["skin"] for sem, d in dependency.items()},
    }

    truth = "snr" if _has_map(ws.gt_texture_base("snr")) else "amp"
    gt_base = ws.gt_texture_base(truth)
    if _has_map(gt_base):
        truth_maps = {}
        for v in views:
            if _has_map(ws.gt_map_base(v, truth)):
                truth_maps[v] = read_map(ws.gt_map_base(v, truth))[0]
        gt_tex, _ = read_map(gt_base)
        baked = read_texture(ws.texture_base("snr")).value
        evaluation["illumination"] = illumination_report(
            _view_maps(ws, "snr", views),
            truth_maps,
            baked,
            gt_tex,
            masks=masks,
            truth=f"gt_{truth}",
        ).to_dict()

    with open(ws.reports_dir / "eval.json", "w", encoding="utf-8") as fp:
        write_json_report(fp, evaluation)
    _stage_log("eval", ws, started, views=len(views))
    return json_safe(evaluation)


# report


def run_report(ws: Workspace) -> str:
    """ASCII summary of the subject's evaluation; also written to ``reports/summary.txt``."""
    path = ws.require(ws.reports_dir / "eval.json", "eval")
    evaluation = json.loads(path.read_text(encoding="utf-8"))
    text = render_summary(ws.manifest.subject, evaluation)
    (ws.reports_dir / "summary.txt").write_text(text + "\n", encoding="utf-8")
    return text


def run_aggregate(root: str | Path, semantics: tuple[str, ...] = BAKE_SEMANTICS) -> dict[str, Any]:
    """Mean and spread of every texture semantic over all subjects under ``root``.

    Results go to ``<root>/aggregate/<semantic>_mean`` and ``_std`` with PNG previews.
    """
    started = time.perf_counter()
    root = Path(root)
    subjects: list[Path] = []
    if root.is_dir():
        subjects = sorted(d for d in root.iterdir() if (d / "textures").is_dir())
    if not subjects:
        raise FileNotFoundError(f"No subject with textures under {root}")
    out_dir = root / "aggregate"
    result: dict[str, Any] = {"subjects": [d.name for d in subjects], "semantics": {}}
    for semantic in semantics:
        bases = [d / "textures" / semantic for d in subjects]
        present = [b for b in bases if _has_map(b)]
        if len(present) < 2:
            continue
        try:
            agg = aggregate_textures([read_texture(b) for b in present], semantic)
        except PulseMapError as e:
            result["semantics"][semantic] = {"error": e.kind, "message": str(e)}
            continue
        for suffix, values in (("mean", agg.mean), ("std", agg.std)):
            name = f"{semantic}_{suffix}"
            write_map(out_dir / name, RawMap(values, name, extra={"subjects": len(present)}))
            preview_semantic = semantic if suffix == "mean" else "amp"
            write_preview(out_dir / f"{name}.png", values, preview_semantic)
        result["semantics"][semantic] = {
            "subjects": len(present),
            "valid_fraction": float(np.isfinite(agg.mean).mean()),
        }
    write_json(out_dir / "aggregate.json", json_safe(result))
    log_with_context(
        logger,
        logging.INFO,
        "Stage finished",
        stage="aggregate",
        subjects=len(subjects),
        elapsed_s=round(time.perf_counter() - started, 3),
    )
    return result

"""Write a rendered scenario as a complete subject workspace plus its ground truth."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..config import MapParameters, RunManifest, StageToggles, WorkspacePaths, write_manifest
from ..core.logging import get_logger, log_with_context
from ..core.orchestrator import StageRunner
from ..data_adapters.csv_adapter import write_ppg_csv
from ..data_adapters.image_adapter import write_frame, write_mask
from ..data_adapters.json_adapter import write_cameras, write_landmarks
from ..data_adapters.model_file import write_model
from ..data_adapters.obj_adapter import write_obj
from ..models import UvTextureMap
from ..persistence.rawmap import RawMap, write_map, write_texture
from ..persistence.workspace import Workspace
from .render import GroundTruthBundle, RenderedViews, render_scenario
from .scenario import SynthScenario

logger = get_logger("synth.export")

# intensity 1.0 maps to this 16-bit code; highlights above ~2.18 saturate
QUANT_SCALE = 30000.0
DEFAULT_SEGMENTS = 7


def quantize(frame: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(frame * QUANT_SCALE), 0, 65535).astype(np.uint16)


def oracle_manifest(sc: SynthScenario, subject: str, seed: int) -> RunManifest:
    cfg = sc.config
    n_segments = DEFAULT_SEGMENTS if cfg.duration_s > cfg.segment_len_s else 1
    return RunManifest(
        subject=subject,
        fps=cfg.fps,
        views=[c.view_id for c in sc.cameras],
        paths=WorkspacePaths(ppg="ppg.csv"),
        maps=MapParameters(
            segment_len_s=cfg.segment_len_s,
            n_segments=n_segments,
            total_len_s=cfg.duration_s,
        ),
        stages=StageToggles(fit=sc.model is not None),
        texture_resolution=cfg.texture_resolution,
        frames_t0_unix_s=cfg.t0_unix_s,
        seed=seed,
    )


def _write_view(ws: Workspace, views: RenderedViews, view_id: int) -> int:
    seq = views[view_id]
    out_dir = ws.frames_dir(view_id)
    for k in range(seq.n_frames):
        write_frame(out_dir, k, quantize(seq.frames[k]))
    return seq.n_frames


def _write_ground_truth(ws: Workspace, gt: GroundTruthBundle) -> None:
    prov = ws.provenance()
    for view_id, maps in gt.view_maps.items():
        for semantic, values in maps.items():
            base = ws.gt_map_base(view_id, semantic.removeprefix("gt_"))
            write_map(base, RawMap(values, semantic, view_id=view_id, provenance=prov))
    for semantic, values in gt.textures.items():
        tex = UvTextureMap.from_values(values, semantic)
        write_texture(ws.gt_texture_base(semantic.removeprefix("gt_")), tex, prov)
    scenario_path = ws.subject_dir / "gt" / "scenario.json"
    scenario_path.write_text(
        json.dumps(gt.scenario.config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_oracle_workspace(
    sc: SynthScenario, root: str | Path, subject: str, seed: int, workers: int = 1
) -> Workspace:
    """Render ``sc`` and lay it out under ``<root>/<subject>`` like a captured subject."""
    views, gt = render_scenario(sc, seed)
    ws = Workspace.for_subject(root, oracle_manifest(sc, subject, seed))
    ws.subject_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(ws.manifest_path, ws.manifest)

    with open(ws.input_path("cameras"), "w", encoding="utf-8") as fp:
        write_cameras(fp, sc.cameras)
    with open(ws.input_path("scan"), "w", encoding="utf-8") as fp:
        write_obj(fp, sc.mesh)
    with open(ws.input_path("ppg"), "w", encoding="utf-8") as fp:
        write_ppg_csv(fp, gt.ppg)
    if sc.model is not None:
        write_model(ws.input_path("model"), sc.model)
        with open(ws.input_path("landmarks"), "w", encoding="utf-8") as fp:
            write_landmarks(fp, gt.landmarks_2d)
    for view_id, mask in gt.masks.items():
        write_mask(ws.mask_path(view_id), mask)

    runner: StageRunner[int, int] = StageRunner(
        lambda v: _write_view(ws, views, v), workers=workers, name="synth_frames"
    )
    counts = runner.map([c.view_id for c in sc.cameras])
    _write_ground_truth(ws, gt)
    log_with_context(
        logger,
        logging.INFO,
        "Oracle workspace written",
        subject=subject,
        views=len(counts),
        frames=int(sum(counts)),
        path=str(ws.subject_dir),
    )
    return ws

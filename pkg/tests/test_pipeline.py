import json
import shutil

import numpy as np
import pytest

from pulsemap3d.config import AppSettings, SynthScenarioConfig
from pulsemap3d.persistence.rawmap import read_map, read_texture
from pulsemap3d.pipeline import (
    BAKE_SEMANTICS,
    map_request,
    run_aggregate,
    run_bake,
    run_eval,
    run_maps,
    run_report,
)
from pulsemap3d.synth.export import write_oracle_workspace
from pulsemap3d.synth.scenario import build_scenario

# 75 BPM over 12 s is an integer number of beats
SCENE = dict(
    geometry="plane",
    hr_bpm=75.0,
    n_views=3,
    view_step_deg=10.0,
    focal_px=80.0,
    width=48,
    height=40,
    fps=15.0,
    duration_s=12.0,
    segment_len_s=6.0,
    texture_resolution=32,
)


def _subject(root, name, **overrides):
    sc = build_scenario(SynthScenarioConfig(**{**SCENE, **overrides}))
    return write_oracle_workspace(sc, root, name, seed=0)


@pytest.fixture(scope="module")
def settings():
    return AppSettings()


@pytest.fixture(scope="module")
def subject(tmp_path_factory, settings):
    root = tmp_path_factory.mktemp("subjects")
    ws = _subject(root, "p01")
    summaries = run_maps(ws, settings)
    return root, ws, summaries


class TestPipeline:
    def test_map_request_follows_manifest(self, subject):
        _, ws, _ = subject
        req = map_request(ws)
        assert (req.k, req.segment_len_s, req.n_segments, req.total_len_s) == (9, 6.0, 7, 12.0)
        assert map_request(ws, k=5).k == 5

    def test_maps(self, subject):
        _, ws, summaries = subject
        assert [s["view_id"] for s in summaries] == [0, 1, 2]
        for s in summaries:
            assert s["status"] == "ok"
            assert s["hr_ref_hz"] == pytest.approx(1.25, abs=0.03)
            assert s["median_hr_bpm"] == pytest.approx(75.0, abs=3.0)
            assert s["valid_fraction"] > 0.0
            assert s["ppg_validation"]["passed"] is True
        values, meta = read_map(ws.map_base(1, "snr"))
        assert values.shape == (40, 48)
        assert meta["manifest_hash"] == ws.manifest.content_hash()
        assert meta["k"] == 9
        ref = json.loads(ws.map_base(1, "reference").with_suffix(".json").read_text())
        assert len(ref["s_ref"]) == 180

    def test_worker_count_does_not_change_outputs(self, subject, settings):
        _, ws, _ = subject
        path = ws.map_base(0, "phase_pos")
        before = path.with_name(path.name + ".f32").read_bytes()
        run_maps(ws, settings, workers=3)
        assert path.with_name(path.name + ".f32").read_bytes() == before

    def test_bake_eval_report(self, subject, settings):
        _, ws, _ = subject
        baked = run_bake(ws, settings, workers=2)
        assert baked["views"] == [0, 1, 2]
        assert baked["resolution"] == 32
        assert set(baked["defined_fraction"]) == set(BAKE_SEMANTICS)
        assert baked["defined_fraction"]["snr"] > 0.2
        assert ws.preview_path("phase_pos").is_file()
        hr = read_texture(ws.texture_base("hr"))
        assert np.nanmedian(hr.value) == pytest.approx(1.25, abs=0.05)

        evaluation = run_eval(ws, settings)
        assert (ws.reports_dir / "eval.json").is_file()
        assert (ws.reports_dir / "reprojection_snr.csv").is_file()
        rms = [r for r in evaluation["reprojection"]["hr"]["rms_full"] if r is not None]
        assert rms and max(rms) < 0.1
        # three views are too few for the dependency test
        assert evaluation["dependency"]["snr"]["error"] == "PreconditionError"
        assert evaluation["illumination"]["truth"] == "gt_snr"
        assert evaluation["maps"]["views"] == 3

        text = run_report(ws)
        assert text.startswith("pulsemap3d report: p01")
        assert (ws.reports_dir / "summary.txt").read_text().startswith(text)

    def test_aggregate(self, subject):
        root, ws, _ = subject
        if not ws.texture_base("snr").with_suffix(".json").is_file():
            pytest.skip("bake did not run")
        shutil.copytree(ws.subject_dir / "textures", root / "p02" / "textures")
        result = run_aggregate(root)
        assert result["subjects"] == ["p01", "p02"]
        std, meta = read_map(root / "aggregate" / "snr_std")
        assert meta["subjects"] == 2
        np.testing.assert_allclose(std[np.isfinite(std)], 0.0, atol=1e-9)
        assert (root / "aggregate" / "phase_pos_mean.png").is_file()


class TestStageDependencies:
    def test_views_without_skin_are_skipped(self, tmp_path, settings):
        ws = _subject(tmp_path, "edge", n_views=3, view_step_deg=180.0)
        summaries = run_maps(ws, settings)
        assert [s["status"] for s in summaries] == ["skipped", "ok", "skipped"]
        assert summaries[0]["error"] == "EmptyMask"
        baked = run_bake(ws, settings)
        assert baked["views"] == [1]

    def test_missing_upstream_outputs(self, tmp_path, settings):
        ws = _subject(tmp_path, "fresh", n_views=1)
        with pytest.raises(FileNotFoundError, match="run the 'maps' stage first"):
            run_bake(ws, settings)
        with pytest.raises(FileNotFoundError, match="run the 'eval' stage first"):
            run_report(ws)
        with pytest.raises(FileNotFoundError):
            run_aggregate(tmp_path / "nowhere")

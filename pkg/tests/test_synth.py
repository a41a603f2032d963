import json
import unittest

import numpy as np
import pytest

from pulsemap3d.config import DiskConfig, PerturbationConfig, SynthScenarioConfig, load_manifest
from pulsemap3d.core.errors import InvalidScenario
from pulsemap3d.data_adapters.image_adapter import frame_paths, read_mask
from pulsemap3d.persistence.rawmap import read_map, read_texture
from pulsemap3d.synth.export import QUANT_SCALE, oracle_manifest, quantize, write_oracle_workspace
from pulsemap3d.synth.render import (
    KAPPA,
    SKIN_RGB,
    SNR_PROXY_CLAMP_DB,
    render_frame,
    render_scenario,
    render_view,
    snr_texture,
    view_geometry,
)
from pulsemap3d.synth.scenario import (
    PERTURBATION_GAIN,
    build_scenario,
    gt_textures,
    load_scenario,
    neck_inversion_patch,
    perturbation_patch,
    subject_beta,
)

TINY = dict(
    geometry="plane",
    hr_bpm=60.0,
    n_views=3,
    view_step_deg=10.0,
    focal_px=70.0,
    width=40,
    height=32,
    fps=20.0,
    duration_s=2.0,
    segment_len_s=1.0,
    texture_resolution=16,
)


def _tiny(**overrides) -> SynthScenarioConfig:
    return SynthScenarioConfig(**{**TINY, **overrides})


class TestTextures(unittest.TestCase):
    def test_subject_beta(self):
        np.testing.assert_allclose(subject_beta(3), [0.8, -0.4, 0.8 / 3])

    def test_uniform(self):
        amp, phase = gt_textures(_tiny(texture_resolution=4, amplitude=0.02))
        np.testing.assert_allclose(amp, 0.02)
        np.testing.assert_allclose(phase, 0.0)

    def test_gradient_amplitude_follows_u(self):
        amp, _ = gt_textures(_tiny(texture_resolution=4, amplitude_pattern="gradient"))
        np.testing.assert_allclose(amp[0], 0.01 * (0.5 + np.array([0.125, 0.375, 0.625, 0.875])))
        np.testing.assert_allclose(amp[:, 2], amp[0, 2])

    def test_split_and_gradient_phase(self):
        _, split = gt_textures(_tiny(texture_resolution=4, phase_pattern="split"))
        np.testing.assert_allclose(split[:, :2], 0.0)
        np.testing.assert_allclose(split[:, 2:], 1.0)
        _, grad = gt_textures(
            _tiny(texture_resolution=4, phase_pattern="gradient", phase_max_rad=0.8)
        )
        np.testing.assert_allclose(grad[0], 0.8 * np.array([-0.75, -0.25, 0.25, 0.75]))

    def test_inversion_adds_pi(self):
        disk = DiskConfig(center_uv=(0.5, 0.5), radius_uv=0.2)
        _, phase = gt_textures(_tiny(texture_resolution=4, inversion=disk))
        np.testing.assert_allclose(phase[1:3, 1:3], np.pi)
        assert phase[0, 0] == 0.0 and phase[3, 3] == 0.0

    def test_perturbation_scales_amplitude(self):
        patch = PerturbationConfig(kind="blemish-drop", center_uv=(0.5, 0.5), radius_uv=0.2)
        amp, _ = gt_textures(_tiny(texture_resolution=4, perturbations=[patch]))
        np.testing.assert_allclose(amp[1:3, 1:3], 0.01 * PERTURBATION_GAIN["blemish-drop"])
        np.testing.assert_allclose(amp[0], 0.01)


class TestScenario:
    def test_plane_scenario(self):
        sc = build_scenario(_tiny())
        assert len(sc.cameras) == 3
        assert sc.n_frames == 40
        assert sc.hr_hz == pytest.approx(1.0)
        assert sc.skin_faces.all()
        assert sc.model is None and sc.landmark_points is None
        assert sc.amp_texture.shape == (16, 16)

    def test_specular_on_unknown_view(self):
        cfg = _tiny(specular=[{"view_id": 5, "center_px": (10.0, 10.0)}])
        with pytest.raises(InvalidScenario):
            build_scenario(cfg)

    def test_load_scenario_validates(self):
        sc = load_scenario({**TINY, "geometry": "sphere"})
        assert sc.config.geometry == "sphere"
        with pytest.raises(InvalidScenario):
            load_scenario({**TINY, "hr_bpm": 300.0})
        with pytest.raises(InvalidScenario):
            load_scenario({**TINY, "colour": "red"})
        with pytest.raises(InvalidScenario):
            load_scenario({**TINY, "duration_s": 0.5})

    def test_patches(self):
        sc = build_scenario(_tiny())
        boosted = perturbation_patch(sc, "scratch-boost", radius_uv=0.1)
        assert boosted.amp_texture.max() == pytest.approx(0.02)
        assert sc.amp_texture.max() == pytest.approx(0.01)
        untouched = perturbation_patch(sc, "scratch-boost", radius_uv=0.0)
        np.testing.assert_array_equal(untouched.amp_texture, sc.amp_texture)
        with pytest.raises(InvalidScenario):
            perturbation_patch(sc, "sunburn")
        inverted = neck_inversion_patch(sc)
        assert np.isclose(np.abs(inverted.phase_texture), np.pi).any()
        assert inverted.mesh is sc.mesh

    @pytest.mark.slow
    def test_head_scenario_has_model_and_landmarks(self):
        sc = build_scenario(_tiny(geometry="head"))
        assert sc.model is not None
        assert sc.landmark_points.shape == (len(sc.model.landmark_vertex_ids), 3)
        assert sc.skin_faces.any() and not sc.skin_faces.all()


class TestRender:
    @pytest.fixture(scope="class")
    def scenario(self):
        return build_scenario(_tiny())

    def test_noiseless_pixel_follows_the_pulse(self, scenario):
        geo = view_geometry(scenario, 1)
        assert geo.hit[16, 20] and geo.mask[16, 20]
        base = 0.6 * SKIN_RGB
        np.testing.assert_allclose(render_frame(scenario, geo, 0, seed=0)[16, 20], base)
        # 1 Hz at 20 fps: frame 5 is the peak
        peak = render_frame(scenario, geo, 5, seed=0)[16, 20]
        np.testing.assert_allclose(peak, base * (1.0 + 0.01 * KAPPA))
        background = render_frame(scenario, geo, 5, seed=0)[0, 0]
        assert not geo.hit[0, 0]
        np.testing.assert_allclose(background, 0.02)

    def test_noise_is_seeded_per_frame(self):
        sc = build_scenario(_tiny(noise_sigma=0.01))
        geo = view_geometry(sc, 0)
        a = render_frame(sc, geo, 7, seed=3)
        np.testing.assert_array_equal(a, render_frame(sc, geo, 7, seed=3))
        assert not np.array_equal(a, render_frame(sc, geo, 7, seed=4))
        stack = render_view(sc, 0, seed=3)
        np.testing.assert_array_equal(stack.frames[7], a.astype(np.float32))

    def test_ringlight_dims_with_distance(self):
        near = view_geometry(build_scenario(_tiny(light={"kind": "ringlight"})), 1)
        far = view_geometry(
            build_scenario(_tiny(light={"kind": "ringlight"}, camera_distance_mm=800.0)), 1
        )
        assert near.light[16, 20] == pytest.approx(0.6 * (400.0 / 600.0) ** 2, rel=1e-3)
        assert far.light[16, 20] < near.light[16, 20]

    def test_specular_highlight_is_view_anchored(self):
        spec = [{"view_id": 0, "center_px": (20.0, 16.0), "strength": 0.5}]
        sc = build_scenario(_tiny(specular=spec))
        lit = render_frame(sc, view_geometry(sc, 0), 0, seed=0)[16, 20]
        plain = render_frame(sc, view_geometry(sc, 1), 0, seed=0)[16, 20]
        np.testing.assert_allclose(lit - plain, 0.5, atol=1e-9)

    def test_render_scenario_ground_truth(self, scenario):
        views, gt = render_scenario(scenario, seed=1)
        assert len(views) == 3
        assert views[-1].view_id == 2
        assert [v.view_id for v in views[0:2]] == [0, 1]
        with pytest.raises(IndexError):
            views[3]
        maps = gt.view_maps[1]
        hit = np.isfinite(maps["gt_hr"])
        assert hit[16, 20] and not hit[0, 0]
        np.testing.assert_allclose(maps["gt_hr"][hit], 1.0)
        np.testing.assert_allclose(maps["gt_amp"][hit], 0.01)
        # noiseless scenes saturate the proxy
        np.testing.assert_allclose(maps["gt_snr"][hit], SNR_PROXY_CLAMP_DB)
        assert gt.masks[1].values[16, 20]
        assert len(gt.ppg.values) == 2 * 60
        assert gt.ppg.t_unix_s[0] == pytest.approx(scenario.config.t0_unix_s)
        assert gt.waveform.samples.shape == (40,)
        assert gt.landmarks_2d == {}

    def test_snr_texture_follows_amplitude(self):
        sc = build_scenario(
            _tiny(amplitude_pattern="gradient", noise_sigma=0.01, noise_model="gaussian")
        )
        db = snr_texture(sc)
        defined = np.isfinite(sc.amp_texture)
        expected = 20 * np.log10(sc.amp_texture[defined] * KAPPA[1] * 0.6 * SKIN_RGB[1] / 0.01)
        np.testing.assert_allclose(db[defined], expected)
        assert np.isnan(db[~defined]).all()
        _, gt = render_scenario(sc, seed=0)
        np.testing.assert_array_equal(gt.textures["gt_snr"], db)

    def test_render_scenario_rejects_bad_input(self, scenario):
        with pytest.raises(InvalidScenario):
            render_scenario(scenario, seed=-1)
        behind = build_scenario(_tiny(n_views=2, view_step_deg=360.0))
        with pytest.raises(InvalidScenario, match="No view sees any skin"):
            render_scenario(behind, seed=0)


class TestExport:
    def test_quantize(self):
        out = quantize(np.array([-0.1, 0.5, 1.0, 3.0]))
        assert out.dtype == np.uint16
        assert out.tolist() == [0, int(0.5 * QUANT_SCALE), int(QUANT_SCALE), 65535]

    def test_oracle_manifest(self):
        sc = build_scenario(_tiny())
        m = oracle_manifest(sc, "synth01", seed=2)
        assert m.views == [0, 1, 2]
        assert m.maps.n_segments == 7
        assert m.maps.total_len_s == 2.0
        assert m.stages.fit is False
        assert m.texture_resolution == 16
        single = oracle_manifest(build_scenario(_tiny(duration_s=1.0)), "s", seed=0)
        assert single.maps.n_segments == 1

    def test_workspace_layout(self, tmp_path):
        sc = build_scenario(_tiny())
        ws = write_oracle_workspace(sc, tmp_path, "synth01", seed=0, workers=2)
        assert ws.subject_dir == tmp_path / "synth01"
        assert load_manifest(ws.manifest_path).content_hash() == ws.manifest.content_hash()
        for name in ("cameras", "scan", "ppg"):
            assert ws.input_path(name).is_file()
        assert not ws.input_path("model").exists()
        for v in range(3):
            assert len(frame_paths(ws.frames_dir(v))) == 40
            assert read_mask(ws.mask_path(v)).values.shape == (32, 40)
        values, meta = read_map(ws.gt_map_base(1, "hr"))
        assert meta["semantic"] == "gt_hr"
        assert np.nanmax(values) == pytest.approx(1.0)
        tex = read_texture(ws.gt_texture_base("amp"))
        assert tex.resolution == 16
        assert read_texture(ws.gt_texture_base("snr")).semantic == "gt_snr"
        scenario = json.loads((ws.subject_dir / "gt" / "scenario.json").read_text())
        assert scenario["geometry"] == "plane"

    def test_same_seed_gives_identical_tree(self, tmp_path):
        sc = build_scenario(_tiny(noise_sigma=0.01))
        trees = []
        for name, workers in (("a", 1), ("b", 3)):
            ws = write_oracle_workspace(sc, tmp_path / name, "synth01", seed=7, workers=workers)
            root = ws.subject_dir
            trees.append(
                {
                    p.relative_to(root).as_posix(): p.read_bytes()
                    for p in sorted(root.rglob("*"))
                    if p.is_file()
                }
            )
        assert len(trees[0]) > 0
        assert trees[0].keys() == trees[1].keys()
        for rel, data in trees[0].items():
            assert data == trees[1][rel], rel

        other = write_oracle_workspace(sc, tmp_path / "c", "synth01", seed=8)
        frame = frame_paths(other.frames_dir(0))[3]
        rel = frame.relative_to(other.subject_dir).as_posix()
        assert frame.read_bytes() != trees[0][rel]


if __name__ == "__main__":
    unittest.main()

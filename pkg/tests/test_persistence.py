import json
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from pulsemap3d import __version__
from pulsemap3d.config import RunManifest, WorkspacePaths, write_manifest
from pulsemap3d.core.errors import CorruptFileError, ManifestError
from pulsemap3d.models import UvTextureMap
from pulsemap3d.persistence.rawmap import (
    SIDECAR_KEYS,
    Provenance,
    RawMap,
    read_map,
    read_texture,
    units_of,
    write_map,
    write_texture,
)
from pulsemap3d.persistence.workspace import Workspace, view_name


class TestRawMap(unittest.TestCase):
    def setUp(self):
        self._td = TemporaryDirectory()
        self.root = Path(self._td.name)

    def tearDown(self):
        self._td.cleanup()

    def test_write_and_read(self):
        values = np.arange(12, dtype=float).reshape(3, 4) / 7.0
        values[1, 2] = np.nan
        prov = Provenance(manifest_hash="abc", seed=5)
        path = write_map(self.root / "maps" / "00" / "snr", RawMap(values, "snr", 9, 0, prov))
        self.assertEqual(path.name, "snr.f32")
        self.assertEqual(path.stat().st_size, 4 * 12)

        again, meta = read_map(self.root / "maps" / "00" / "snr")
        np.testing.assert_allclose(again, values.astype(np.float32), equal_nan=True)
        self.assertTrue(set(SIDECAR_KEYS) <= set(meta))
        self.assertEqual((meta["width"], meta["height"]), (4, 3))
        self.assertEqual(meta["units"], "dB")
        self.assertEqual(meta["k"], 9)
        self.assertEqual(meta["manifest_hash"], "abc")
        self.assertEqual(meta["seed"], 5)
        self.assertEqual(meta["tool_version"], __version__)

    def test_bytes_are_little_endian_row_major(self):
        values = np.array([[1.0, 2.0], [3.0, 4.0]])
        path = write_map(self.root / "m", RawMap(values, "amp_g"))
        np.testing.assert_array_equal(np.fromfile(path, dtype="<f4"), [1, 2, 3, 4])

    def test_sidecar_is_deterministic(self):
        values = np.ones((2, 2))
        write_map(self.root / "a", RawMap(values, "hr"))
        write_map(self.root / "b", RawMap(values, "hr"))
        self.assertEqual(
            (self.root / "a.json").read_bytes(), (self.root / "b.json").read_bytes()
        )

    def test_units(self):
        self.assertEqual(units_of("phase_pos"), "rad")
        self.assertEqual(units_of("gt_phase_pos"), "rad")
        self.assertEqual(units_of("hr"), "Hz")
        self.assertEqual(units_of("phase_pos_confidence"), "1")
        self.assertEqual(units_of("something_else"), "1")

    def test_non_2d_rejected(self):
        with self.assertRaises(ValueError):
            write_map(self.root / "x", RawMap(np.zeros(4), "snr"))

    def test_missing_and_corrupt(self):
        with self.assertRaises(FileNotFoundError):
            read_map(self.root / "none")
        write_map(self.root / "m", RawMap(np.zeros((2, 3)), "snr"))
        (self.root / "m.f32").write_bytes(b"\0" * 8)
        with self.assertRaises(CorruptFileError):
            read_map(self.root / "m")
        (self.root / "m.json").write_text("{", encoding="utf-8")
        with self.assertRaises(CorruptFileError):
            read_map(self.root / "m")


class TestTextures:
    def test_scalar_texture_round_trip(self, tmp_path):
        values = np.full((4, 4), np.nan)
        values[1:3, 1:3] = 2.5
        tex = UvTextureMap.from_values(values, "snr")
        write_texture(tmp_path / "snr", tex, Provenance())
        assert (tmp_path / "snr_views.f32").is_file()
        assert not (tmp_path / "snr_confidence.f32").exists()
        again = read_texture(tmp_path / "snr")
        assert again.semantic == "snr"
        np.testing.assert_allclose(again.value, values, equal_nan=True)
        np.testing.assert_array_equal(again.n_views, np.isfinite(values).astype(int))

    def test_phase_texture_writes_confidence(self, tmp_path):
        values = np.full((2, 2), 0.5)
        values[0, 0] = np.pi
        tex = UvTextureMap.from_values(values, "phase_pos")
        write_texture(tmp_path / "phase_pos", tex, Provenance(seed=3))
        conf, meta = read_map(tmp_path / "phase_pos_confidence")
        np.testing.assert_allclose(conf, 1.0)
        assert meta["semantic"] == "phase_pos_confidence"
        again = read_texture(tmp_path / "phase_pos")
        assert again.is_phase
        np.testing.assert_allclose(again.value, values, atol=1e-6)
        _, tmeta = read_map(tmp_path / "phase_pos")
        assert tmeta["kind"] == "texture"
        assert tmeta["resolution"] == 2

    def test_non_square_texture_is_corrupt(self, tmp_path):
        write_map(tmp_path / "t", RawMap(np.zeros((2, 3)), "snr"))
        with pytest.raises(CorruptFileError):
            read_texture(tmp_path / "t")


class TestWorkspace:
    def _workspace(self, tmp_path, **kwargs) -> Workspace:
        manifest = RunManifest(subject="s01", seed=4, **kwargs)
        ws = Workspace.for_subject(tmp_path, manifest)
        ws.subject_dir.mkdir(parents=True)
        write_manifest(ws.manifest_path, manifest)
        return ws

    def test_layout(self, tmp_path):
        ws = self._workspace(tmp_path)
        assert view_name(3) == "03"
        assert ws.frames_dir(3) == tmp_path / "s01" / "frames" / "03"
        assert ws.mask_path(3) == tmp_path / "s01" / "masks" / "03.png"
        assert ws.map_base(12, "amp_g") == tmp_path / "s01" / "maps" / "12" / "amp_g"
        assert ws.texture_base("snr").parent.name == "textures"
        assert ws.preview_path("snr").name == "snr.png"
        assert ws.gt_map_base(0, "amp").name == "gt_amp"
        assert ws.fitted_mesh_path.name == "fitted.obj"

    def test_open_reads_manifest(self, tmp_path):
        ws = self._workspace(tmp_path, views=[2, 0])
        opened = Workspace.open(ws.manifest_path)
        assert opened.manifest == ws.manifest
        assert opened.subject_dir == ws.subject_dir.resolve()
        assert opened.views() == [0, 2]
        assert opened.provenance().seed == 4
        assert opened.provenance().manifest_hash == ws.manifest.content_hash()

    def test_open_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Workspace.open(tmp_path / "manifest.json")

    def test_views_from_frame_directories(self, tmp_path):
        ws = self._workspace(tmp_path)
        for v in ("00", "01", "07", "notes"):
            (ws.subject_dir / "frames" / v).mkdir(parents=True)
        assert ws.views() == [0, 1, 7]

    def test_require_input(self, tmp_path):
        ws = self._workspace(tmp_path)
        with pytest.raises(FileNotFoundError):
            ws.require_input("scan")
        (ws.subject_dir / "scan.obj").write_text("v 0 0 0\n", encoding="utf-8")
        assert ws.require_input("scan").name == "scan.obj"
        with pytest.raises(ManifestError):
            ws.input_path("ppg")

    def test_require_input_checks_extension(self, tmp_path):
        ws = self._workspace(tmp_path, paths=WorkspacePaths(cameras="cameras.txt"))
        (ws.subject_dir / "cameras.txt").write_text("[]", encoding="utf-8")
        with pytest.raises(ValueError, match="not allowed"):
            ws.require_input("cameras")

    def test_require_names_the_producing_stage(self, tmp_path):
        ws = self._workspace(tmp_path)
        with pytest.raises(FileNotFoundError, match="run the 'fit' stage first"):
            ws.require(ws.fitted_mesh_path, "fit")

    def test_manifest_file_is_sorted_json(self, tmp_path):
        ws = self._workspace(tmp_path)
        data = json.loads(ws.manifest_path.read_text(encoding="utf-8"))
        assert list(data) == sorted(data)


if __name__ == "__main__":
    unittest.main()

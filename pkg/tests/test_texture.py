import numpy as np
import pytest

from pulsemap3d.core.errors import DimensionMismatch, MissingUVs, SemanticMismatch
from pulsemap3d.geometry.camera import arc_cameras
from pulsemap3d.geometry.mesh import ellipsoid_mesh, plane_mesh
from pulsemap3d.geometry.raster import rasterize
from pulsemap3d.geometry.texture import (
    bake_view,
    bake_views,
    check_compatible,
    pixel_uvs,
    reproject,
    sample_texture,
    texel_centers,
    texel_surface,
    uv_to_texel,
    visible_texels,
)
from pulsemap3d.models import TriMesh, UvTextureMap

SIZE = 64


def _cams(n=1, step=0.0):
    return arc_cameras(n, step, 600.0, 600.0, SIZE, SIZE)


def _occluded_scene():
    """A 40 mm plane with a small occluder 100 mm in front of it.

    The occluder's UVs lie outside the unit square so that it owns no texel.
    """
    base = plane_mesh(40.0, 40.0, 4, 4)
    blocker = plane_mesh(10.0, 10.0, 1, 1, center=(0.0, 0.0, 100.0))
    uv = np.concatenate([base.uv_coords, [[5.0, 5.0]]])
    off = len(base.uv_coords)
    return TriMesh(
        vertices=np.concatenate([base.vertices, blocker.vertices]),
        faces=np.concatenate([base.faces, blocker.faces + base.n_vertices]),
        uv_coords=uv,
        face_uvs=np.concatenate([base.face_uvs, np.full(blocker.faces.shape, off)]),
    )


class TestTexelGrid:
    def test_texel_centers(self):
        c = texel_centers(4)
        np.testing.assert_allclose(c[0, 0], [0.125, 0.875])
        np.testing.assert_allclose(c[3, 1], [0.375, 0.125])
        cols, rows = uv_to_texel(c, 4)
        np.testing.assert_allclose(cols[2], [0, 1, 2, 3])
        np.testing.assert_allclose(rows[:, 1], [0, 1, 2, 3])

    def test_plane_surface_covers_the_grid(self):
        surface = texel_surface(plane_mesh(40.0, 20.0, 3, 3), 16)
        assert surface.covered.all()
        centre = texel_centers(16)
        expected_x = centre[..., 0] * 40.0 - 20.0
        expected_y = centre[..., 1] * 20.0 - 10.0
        np.testing.assert_allclose(surface.position[..., 0], expected_x, atol=1e-9)
        np.testing.assert_allclose(surface.position[..., 1], expected_y, atol=1e-9)
        np.testing.assert_allclose(surface.normal[..., 2], 1.0)

    def test_missing_uvs(self):
        plain = plane_mesh(10.0, 10.0, 1, 1)
        with pytest.raises(MissingUVs):
            texel_surface(TriMesh(plain.vertices, plain.faces), 8)


class TestVisibility:
    def test_front_and_back(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        surface = texel_surface(mesh, 16)
        front = visible_texels(surface, mesh, _cams()[0])
        assert front.visible.all()
        assert np.all(front.cosine > 0.99)
        np.testing.assert_allclose(front.pixel_xy[8, 8], [31.5 + 1.25, 31.5 + 1.25], atol=1e-9)

        far_side = arc_cameras(1, 0.0, -600.0, 600.0, SIZE, SIZE)[0]
        back = visible_texels(surface, mesh, far_side)
        assert not back.visible.any()
        assert np.isnan(back.pixel_xy).all()

    def test_occluder_hides_centre(self):
        mesh = _occluded_scene()
        surface = texel_surface(mesh, 16)
        vis = visible_texels(surface, mesh, _cams()[0])
        assert surface.covered.all()
        assert not vis.visible[8, 8]
        assert vis.visible[0, 0] and vis.visible[15, 15]
        brute = visible_texels(surface, mesh, _cams()[0], brute_force=True)
        np.testing.assert_array_equal(vis.visible, brute.visible)

    def test_tiled_matches_brute_force_on_ellipsoid(self):
        mesh = ellipsoid_mesh((50.0, 80.0, 60.0), 10, 16)
        surface = texel_surface(mesh, 24)
        cam = _cams(3, 30.0)[2]
        tiled = visible_texels(surface, mesh, cam)
        brute = visible_texels(surface, mesh, cam, brute_force=True)
        np.testing.assert_array_equal(tiled.visible, brute.visible)
        assert 0 < tiled.visible.sum() < surface.covered.sum()


class TestBake:
    def test_constant_map(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        cam = _cams()[0]
        tex = bake_view(np.full((SIZE, SIZE), 2.0), mesh, cam, UvTextureMap.empty(16, "snr"))
        assert tex.defined.all()
        np.testing.assert_allclose(tex.value, 2.0)
        np.testing.assert_array_equal(tex.n_views, 1)

    def test_phase_map(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        tex = bake_view(
            np.full((SIZE, SIZE), 3.0), mesh, _cams()[0], UvTextureMap.empty(16, "phase_pos")
        )
        assert tex.is_phase
        np.testing.assert_allclose(tex.value, 3.0)
        np.testing.assert_allclose(tex.confidence, 1.0)

    def test_nan_pixels_are_skipped(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        map2d = np.full((SIZE, SIZE), 1.0)
        map2d[:, :32] = np.nan
        tex = bake_view(map2d, mesh, _cams()[0], UvTextureMap.empty(16, "snr"))
        assert tex.defined[:, 12:].all()
        assert not tex.defined[:, :4].any()

    def test_views_average(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        cams = _cams(2, 10.0)
        maps = [np.full((SIZE, SIZE), 1.0), np.full((SIZE, SIZE), 2.0)]
        uniform = bake_views(maps, mesh, cams, "amp_g", 16, weight_mode="uniform")
        seen_twice = uniform.n_views == 2
        assert seen_twice.any()
        np.testing.assert_allclose(uniform.value[seen_twice], 1.5)
        cosine = bake_views(maps, mesh, cams, "amp_g", 16)
        np.testing.assert_allclose(cosine.value[seen_twice], 1.5, atol=0.05)

    def test_circular_mean_across_views(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        maps = [np.full((SIZE, SIZE), np.pi - 0.1), np.full((SIZE, SIZE), -np.pi + 0.1)]
        tex = bake_views(maps, mesh, _cams(2, 10.0), "phase_g", 16, weight_mode="uniform")
        both = tex.n_views == 2
        np.testing.assert_allclose(np.abs(tex.value[both]), np.pi, atol=1e-9)
        assert np.all(tex.confidence[both] < 1.0)

    def test_shape_checks(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        with pytest.raises(DimensionMismatch):
            bake_view(np.zeros((4, 4)), mesh, _cams()[0], UvTextureMap.empty(16, "snr"))
        with pytest.raises(DimensionMismatch):
            bake_views([np.zeros((SIZE, SIZE))], mesh, _cams(2, 10.0), "snr", 16)


class TestReproject:
    def test_sample_texture(self):
        values = np.arange(16, dtype=float).reshape(4, 4)
        centres = texel_centers(4)
        np.testing.assert_allclose(sample_texture(values, centres), values)
        np.testing.assert_allclose(sample_texture(values, centres, mode="nearest"), values)
        mid = np.array([0.25, 0.875])  # halfway between texels (0, 0) and (0, 1)
        assert sample_texture(values, mid) == pytest.approx(0.5)

    def test_sample_texture_skips_nan(self):
        values = np.array([[1.0, np.nan], [3.0, 5.0]])
        assert sample_texture(values, np.array([0.5, 0.5])) == pytest.approx(3.0)
        assert np.isnan(sample_texture(np.full((2, 2), np.nan), np.array([0.5, 0.5])))

    def test_sample_phase_texture_wraps(self):
        values = np.array([[np.pi - 0.1, -np.pi + 0.1], [np.pi - 0.1, -np.pi + 0.1]])
        out = sample_texture(values, np.array([0.5, 0.5]), phase=True)
        assert abs(out) == pytest.approx(np.pi)

    def test_pixel_uvs(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        cam = _cams()[0]
        uv = pixel_uvs(mesh, rasterize(mesh, cam))
        assert np.isnan(uv[0, 0]).all()
        np.testing.assert_allclose(uv[32, 32], [0.5 + 0.5 / 40, 0.5 - 0.5 / 40], atol=1e-9)

    def test_bake_then_reproject_recovers_smooth_map(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        cam = _cams()[0]
        cols = np.broadcast_to(np.arange(SIZE, dtype=float), (SIZE, SIZE))
        original = 0.1 * cols
        tex = bake_views([original], mesh, [cam], "snr", 64)
        back = reproject(tex, mesh, cam)
        raster = rasterize(mesh, cam)
        both = raster.hit & np.isfinite(back)
        assert both.sum() >= 0.9 * raster.hit.sum()
        assert np.all(np.isnan(back[~raster.hit]))
        assert np.max(np.abs(back[both] - original[both])) < 0.15

    def test_check_compatible(self):
        a = UvTextureMap.empty(8, "snr")
        check_compatible([a, UvTextureMap.empty(8, "snr")])
        with pytest.raises(SemanticMismatch):
            check_compatible([a, UvTextureMap.empty(16, "snr")])
        with pytest.raises(SemanticMismatch):
            check_compatible([a, UvTextureMap.empty(8, "hr")])
        with pytest.raises(SemanticMismatch):
            check_compatible([UvTextureMap.from_values(np.zeros((8, 8)), "snr")], "phase_pos")

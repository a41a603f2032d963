import unittest

import numpy as np
import pytest

from pulsemap3d.core.errors import LandmarkOffSurface, PreconditionError
from pulsemap3d.geometry.camera import arc_cameras, look_at, pixel_grid
from pulsemap3d.geometry.mesh import (
    ellipsoid_mesh,
    face_components,
    plane_mesh,
    submesh,
    vertex_normals,
)
from pulsemap3d.geometry.raster import backproject_landmarks, rasterize, ray_triangle_intersect
from pulsemap3d.models import CameraParams, TriMesh


def _front_camera(size=64, distance=600.0, focal=600.0) -> CameraParams:
    return arc_cameras(1, 0.0, distance, focal, size, size)[0]


class TestCamera(unittest.TestCase):
    def test_look_at_follows_opencv_axes(self):
        cam = _front_camera()
        np.testing.assert_allclose(cam.center, [0.0, 0.0, 600.0], atol=1e-9)
        xy, z = cam.project(np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0]]))
        np.testing.assert_allclose(z, 600.0)
        np.testing.assert_allclose(xy[0], [31.5, 31.5])
        self.assertGreater(xy[1, 0], 31.5)  # +x appears to the right
        self.assertLess(xy[2, 1], 31.5)  # +y appears upwards

    def test_look_at_rejects_degenerate_input(self):
        with self.assertRaises(PreconditionError):
            look_at(np.zeros(3), np.zeros(3))
        with self.assertRaises(PreconditionError):
            look_at(np.array([0.0, 5.0, 0.0]), np.zeros(3))

    def test_arc_cameras(self):
        cams = arc_cameras(5, 15.0, 500.0, 300.0, 40, 30)
        self.assertEqual([c.view_id for c in cams], list(range(5)))
        for c in cams:
            self.assertAlmostEqual(float(np.linalg.norm(c.center)), 500.0)
            self.assertEqual((c.cx, c.cy), (19.5, 14.5))
        self.assertAlmostEqual(cams[2].center[0], 0.0)
        azimuth = np.degrees(np.arctan2(cams[4].center[0], cams[4].center[2]))
        self.assertAlmostEqual(azimuth, 30.0)

    def test_pixel_rays_hit_projection(self):
        cam = arc_cameras(3, 20.0, 500.0, 300.0, 40, 30)[0]
        point = np.array([[12.0, -7.0, 3.0]])
        xy, z = cam.project(point)
        ray = cam.pixel_rays(xy)[0]
        np.testing.assert_allclose(cam.center + z[0] * ray / (ray @ cam.rotation[2]), point[0])

    def test_pixel_grid(self):
        grid = pixel_grid(4, 3)
        self.assertEqual(grid.shape, (3, 4, 2))
        np.testing.assert_array_equal(grid[2, 1], [1.0, 2.0])


class TestMesh:
    def test_plane(self):
        mesh = plane_mesh(30.0, 20.0, 3, 2)
        assert mesh.n_vertices == 12 and mesh.n_faces == 12
        np.testing.assert_allclose(mesh.face_normals(), np.tile([0.0, 0.0, 1.0], (12, 1)))
        assert mesh.uv_coords.min() == 0.0 and mesh.uv_coords.max() == 1.0
        assert mesh.face_areas().sum() == pytest.approx(600.0)
        with pytest.raises(PreconditionError):
            plane_mesh(1.0, 1.0, 0, 1)

    def test_ellipsoid(self):
        n_lat, n_lon = 6, 10
        mesh = ellipsoid_mesh((50.0, 80.0, 60.0), n_lat, n_lon)
        assert mesh.n_vertices == 2 + (n_lat - 1) * n_lon
        assert mesh.n_faces == 2 * n_lon + 2 * n_lon * (n_lat - 2)
        centroids = mesh.triangles.mean(axis=1)
        assert np.all(np.einsum("fd,fd->f", mesh.face_normals(), centroids) > 0)
        assert 0.0 <= mesh.uv_coords.min() and mesh.uv_coords.max() <= 1.0
        assert face_components(mesh)[0] == 1

    def test_front_of_ellipsoid_maps_to_uv_centre(self):
        mesh = ellipsoid_mesh((50.0, 80.0, 60.0), 8, 12)
        front = int(np.argmax(mesh.vertices[:, 2]))
        corners = np.argwhere(mesh.faces == front)
        f, k = corners[0]
        assert mesh.uv_coords[mesh.face_uvs[f, k], 0] == pytest.approx(0.5)

    def test_vertex_normals(self):
        normals = vertex_normals(plane_mesh(10.0, 10.0, 2, 2))
        np.testing.assert_allclose(normals, np.tile([0.0, 0.0, 1.0], (9, 1)))

    def test_components_and_submesh(self):
        a = plane_mesh(10.0, 10.0, 1, 1)
        b = plane_mesh(10.0, 10.0, 1, 1, center=(50.0, 0.0, 0.0))
        both = TriMesh(
            vertices=np.concatenate([a.vertices, b.vertices]),
            faces=np.concatenate([a.faces, b.faces + a.n_vertices]),
        )
        count, labels = face_components(both)
        assert count == 2
        assert labels[0] == labels[1] != labels[2]
        part = submesh(both, labels == labels[2])
        assert part.n_vertices == 4 and part.n_faces == 2
        np.testing.assert_allclose(part.vertices, b.vertices)


class TestRaster:
    def test_plane_is_rendered_in_the_centre(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        r = rasterize(mesh, _front_camera())
        assert r.hit[32, 32]
        assert not r.hit[0, 0]
        assert r.depth[32, 32] == pytest.approx(600.0)
        # 40 mm at 600 mm with f = 600 px covers about 40 px
        assert 38 <= r.hit[32].sum() <= 42
        np.testing.assert_allclose(r.bary[r.hit].sum(axis=1), 1.0)
        points = r.surface_points(mesh)
        np.testing.assert_allclose(points[r.hit][:, 2], 0.0, atol=1e-9)
        assert np.isnan(points[0, 0]).all()

    def test_back_faces_are_culled(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        behind = CameraParams(
            fx=600.0,
            fy=600.0,
            cx=31.5,
            cy=31.5,
            width=64,
            height=64,
            world_to_cam=look_at(np.array([0.0, 0.0, -600.0]), np.zeros(3)),
        )
        assert not rasterize(mesh, behind).hit.any()

    def test_nearest_surface_wins(self):
        far = plane_mesh(40.0, 40.0, 1, 1)
        near = plane_mesh(10.0, 10.0, 1, 1, center=(0.0, 0.0, 100.0))
        mesh = TriMesh(
            vertices=np.concatenate([far.vertices, near.vertices]),
            faces=np.concatenate([far.faces, near.faces + far.n_vertices]),
        )
        r = rasterize(mesh, _front_camera())
        assert r.face_id[32, 32] >= 2
        assert r.depth[32, 32] == pytest.approx(500.0)
        assert r.face_id[32, 15] in (0, 1)

    def test_sphere_silhouette_radius(self):
        mesh = ellipsoid_mesh((90.0, 90.0, 90.0), n_lat=48, n_lon=64)
        r = rasterize(mesh, _front_camera(size=96, focal=200.0))
        # tangent cone: f * tan(asin(R / d))
        expected = 200.0 * np.tan(np.arcsin(90.0 / 600.0))
        assert np.sqrt(r.hit.sum() / np.pi) == pytest.approx(expected, rel=0.03)
        rows, cols = np.nonzero(r.hit)
        assert (rows.mean(), cols.mean()) == pytest.approx((47.5, 47.5), abs=0.5)

    def test_ray_triangle_intersect(self):
        tri = np.array([[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
        origins = np.array([[0.2, 0.3, 5.0], [2.0, 2.0, 5.0]])
        dirs = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, -1.0]])
        t, u, v = ray_triangle_intersect(origins, dirs, tri)
        assert t[0, 0] == pytest.approx(5.0)
        assert (u[0, 0], v[0, 0]) == pytest.approx((0.2, 0.3))
        assert np.isinf(t[1, 0])

    def test_backproject_landmarks(self):
        mesh = plane_mesh(40.0, 40.0, 2, 2)
        cam = _front_camera()
        r = rasterize(mesh, cam)
        lmk = np.array([[31.5, 31.5], [41.5, 31.5], [0.0, 0.0], [np.nan, np.nan]])
        out = backproject_landmarks(lmk, r, mesh, cam)
        np.testing.assert_allclose(out.points[0], [0.0, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(out.points[1], [10.0, 0.0, 0.0], atol=1e-9)
        assert out.missing == (2, 3)
        assert out.found.tolist() == [True, True, False, False]
        assert all(isinstance(e, LandmarkOffSurface) for e in out.errors())


if __name__ == "__main__":
    unittest.main()

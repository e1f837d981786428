import numpy as np
import pytest

from navfield.errors import InvalidFieldData
from navfield.geometry import GridSpec, ScalarField, ijk_to_world, rotation_about
from navfield.projection import (
    ColorMap,
    FiberBundle,
    apply_colormap,
    fiber_bundle_from_json,
    fiber_bundle_to_json,
    field_colormap,
    project_to_fibers,
    project_to_mesh,
    sample_trilinear,
)
from navfield.volio import SurfaceMesh

from .oracles import trilinear_8corner


def grid(dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0), origin=(0, 0, 0),
         axes=None):
    return GridSpec(dims=dims, spacing=spacing, origin=origin,
                    axes=np.eye(3) if axes is None else axes)


def affine_field(g, a=0.0, b=0.0, c=0.0, d=1.0):
    nx, ny, nz = g.dims
    kk, jj, ii = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx),
                             indexing="ij")
    return ScalarField(grid=g, data=d + a * ii + b * jj + c * kk)


class TestSampleTrilinear:
    def test_constant_field(self):
        g = grid()
        f = ScalarField(grid=g, data=np.full((8, 8, 8), 3.25))
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 7, (50, 3))
        np.testing.assert_allclose(sample_trilinear(f, pts), 3.25, rtol=1e-14)

    def test_affine_exact(self):
        g = grid(spacing=(0.9, 1.2, 0.5), origin=(3, -2, 7),
                 axes=rotation_about((1, 2, 0), 0.4))
        f = affine_field(g, a=2.0, b=-1.0, c=0.5, d=12.0)
        rng = np.random.default_rng(1)
        ijk = rng.uniform(0, 7, (200, 3))
        pts = ijk_to_world(g, ijk)
        want = 12.0 + 2.0 * ijk[:, 0] - 1.0 * ijk[:, 1] + 0.5 * ijk[:, 2]
        got = sample_trilinear(f, pts)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_out_of_bounds_is_zero(self):
        g = grid()
        f = ScalarField(grid=g, data=np.full((8, 8, 8), 9.0))
        assert sample_trilinear(f, (1000.0, 0.0, 0.0)) == 0.0
        assert sample_trilinear(f, (-0.51, 3.0, 3.0)) == 0.0
        # boundary itself is in bounds
        assert sample_trilinear(f, (7.0, 7.0, 7.0)) == 9.0

    def test_matches_8corner_oracle(self):
        rng = np.random.default_rng(2)
        g = grid()
        data = rng.uniform(0, 5, (8, 8, 8))
        f = ScalarField(grid=g, data=data)
        ijk = rng.uniform(0, 7, (100, 3))
        pts = ijk_to_world(g, ijk)
        got = sample_trilinear(f, pts)
        want = np.array([trilinear_8corner(data, x) for x in ijk])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_bounded_by_corners(self):
        rng = np.random.default_rng(3)
        g = grid()
        data = rng.uniform(0, 5, (8, 8, 8))
        f = ScalarField(grid=g, data=data)
        pts = ijk_to_world(g, rng.uniform(0, 7, (500, 3)))
        vals = sample_trilinear(f, pts)
        assert np.all(vals >= data.min() - 1e-12)
        assert np.all(vals <= data.max() + 1e-12)

    def test_single_voxel_axis(self):
        g = grid(dims=(1, 4, 4))
        f = ScalarField(grid=g, data=np.full((4, 4, 1), 2.0))
        assert sample_trilinear(f, (0.0, 1.5, 1.5)) == 2.0


class TestProjectToMesh:
    def test_constant_field_all_vertices_equal(self):
        g = grid()
        f = ScalarField(grid=g, data=np.full((8, 8, 8), 2.5))
        mesh = SurfaceMesh(vertices=np.random.default_rng(4).uniform(1, 6, (100, 3)),
                           triangles=[[0, 1, 2]])
        values, stats = project_to_mesh(f, mesh)
        np.testing.assert_allclose(values, 2.5, rtol=1e-14)
        assert stats.vmin == pytest.approx(stats.vmax, rel=1e-12)

    def test_mesh_outside_grid_is_zero(self):
        g = grid()
        f = ScalarField(grid=g, data=np.full((8, 8, 8), 2.5))
        mesh = SurfaceMesh(vertices=np.full((10, 3), 500.0) +
                           np.arange(30).reshape(10, 3),
                           triangles=[[0, 1, 2]])
        values, stats = project_to_mesh(f, mesh)
        np.testing.assert_array_equal(values, 0.0)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        g = grid()
        f = ScalarField(grid=g, data=rng.uniform(0, 5, (8, 8, 8)))
        mesh = SurfaceMesh(vertices=rng.uniform(0, 7, (5000, 3)),
                           triangles=[[0, 1, 2]])
        a, _ = project_to_mesh(f, mesh)
        b, _ = project_to_mesh(f, mesh)
        np.testing.assert_array_equal(a, b)

    def test_linear_in_field(self):
        rng = np.random.default_rng(6)
        g = grid()
        data = rng.uniform(0, 5, (8, 8, 8))
        mesh = SurfaceMesh(vertices=rng.uniform(0, 7, (200, 3)),
                           triangles=[[0, 1, 2]])
        v1, _ = project_to_mesh(ScalarField(grid=g, data=data), mesh)
        # power-of-two scale commutes with IEEE rounding, so this is bit-exact
        v2, _ = project_to_mesh(ScalarField(grid=g, data=2.0 * data), mesh)
        np.testing.assert_array_equal(v2, 2.0 * v1)
        v3, _ = project_to_mesh(ScalarField(grid=g, data=3.0 * data), mesh)
        np.testing.assert_allclose(v3, 3.0 * v1, rtol=1e-13)

    def test_stats_argmax(self):
        g = grid()
        data = np.zeros((8, 8, 8))
        data[3, 3, 3] = 7.0
        f = ScalarField(grid=g, data=data)
        mesh = SurfaceMesh(vertices=[(0.5, 0.5, 0.5), (3.0, 3.0, 3.0), (0, 0, 0)],
                           triangles=[[0, 1, 2]])
        values, stats = project_to_mesh(f, mesh)
        assert stats.argmax == 1
        assert stats.vmax == pytest.approx(7.0)


class TestFibers:
    def test_constant(self):
        g = grid()
        f = ScalarField(grid=g, data=np.full((8, 8, 8), 1.5))
        fb = FiberBundle(polylines=([(1, 1, 1), (2, 2, 2), (3, 3, 3)],
                                    [(0, 0, 0), (1, 0, 0)]))
        out = project_to_fibers(f, fb)
        assert len(out) == 2
        np.testing.assert_allclose(out[0], 1.5)
        assert len(out[0]) == 3 and len(out[1]) == 2

    def test_empty_bundle(self):
        g = grid()
        f = ScalarField(grid=g, data=np.zeros((8, 8, 8)))
        assert project_to_fibers(f, FiberBundle(polylines=())) == []

    def test_two_point_line_matches_samples(self):
        rng = np.random.default_rng(7)
        g = grid()
        f = ScalarField(grid=g, data=rng.uniform(0, 5, (8, 8, 8)))
        a, b = (1.2, 3.4, 2.2), (5.5, 0.7, 6.1)
        fb = FiberBundle(polylines=([a, b],))
        out = project_to_fibers(f, fb)[0]
        assert out[0] == pytest.approx(sample_trilinear(f, a), abs=1e-15)
        assert out[1] == pytest.approx(sample_trilinear(f, b), abs=1e-15)

    def test_json_round_trip(self):
        fb = FiberBundle(polylines=([(0, 0, 0), (1, 2, 3)],
                                    [(5, 5, 5), (6, 6, 6), (7, 7, 7)]))
        again = fiber_bundle_from_json(fiber_bundle_to_json(fb))
        assert again.n_polylines == 2
        np.testing.assert_array_equal(again.polylines[1], fb.polylines[1])

    def test_short_polyline_rejected(self):
        with pytest.raises(InvalidFieldData):
            FiberBundle(polylines=([(0, 0, 0)],))


class TestColormap:
    def test_endpoints(self):
        cm = field_colormap(vmax=10.0)
        lo = apply_colormap([0.0], cm)[0]
        hi = apply_colormap([10.0], cm)[0]
        np.testing.assert_array_equal(lo, (0, 0, 255))
        np.testing.assert_array_equal(hi, (255, 0, 0))

    def test_clamping(self):
        cm = field_colormap(vmax=10.0)
        np.testing.assert_array_equal(apply_colormap([-5.0], cm)[0], (0, 0, 255))
        np.testing.assert_array_equal(apply_colormap([99.0], cm)[0], (255, 0, 0))

    def test_midpoint_gray(self):
        cm = ColorMap(vmin=0.0, vmax=1.0,
                      stops=((0.0, (0, 0, 0)), (1.0, (255, 255, 255))))
        mid = apply_colormap([0.5], cm)[0]
        np.testing.assert_array_equal(mid, (128, 128, 128))

    def test_nan_maps_to_first(self):
        cm = field_colormap(vmax=1.0)
        np.testing.assert_array_equal(apply_colormap([np.nan], cm)[0], (0, 0, 255))

    def test_validation(self):
        with pytest.raises(InvalidFieldData):
            ColorMap(vmin=1.0, vmax=1.0, stops=((0.0, (0, 0, 0)), (1.0, (1, 1, 1))))
        with pytest.raises(InvalidFieldData):
            ColorMap(vmin=0.0, vmax=1.0, stops=((0.1, (0, 0, 0)), (1.0, (1, 1, 1))))
        with pytest.raises(InvalidFieldData):
            ColorMap(vmin=0.0, vmax=1.0,
                     stops=((0.0, (0, 0, 0)), (0.5, (1, 1, 1)), (0.4, (2, 2, 2)),
                            (1.0, (3, 3, 3))))

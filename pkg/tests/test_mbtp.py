import numpy as np
import pytest

from areatrack.errors import EmptyRegion, NoValidPoints
from areatrack.geometry import BBox, CameraIntrinsics, DepthMap
from areatrack.mbtp import (
    ELLIPSE_FACTOR,
    bounding_rect,
    estimate_area,
    patch_area,
    project_region,
    triangle_area,
)

INTR = CameraIntrinsics(f_u=1000.0, f_v=1000.0, p_u=960.0, p_v=540.0, width=1920, height=1080)


def uniform_depth(z: float) -> DepthMap:
    return DepthMap(1920, 1080, np.full((1080, 1920), z, np.float32))


def shoelace(pts) -> float:
    # independent polygon-area oracle
    s = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


class TestProjectRegion:
    def test_grid_spacing(self):
        d = uniform_depth(1.0)
        r = project_region(BBox(100, 100, 2, 2), d, INTR)
        assert r.shape == (2, 2)
        assert r.X[0, 1] - r.X[0, 0] == pytest.approx(0.001)
        assert r.Y[1, 0] - r.Y[0, 0] == pytest.approx(0.001)
        assert r.valid.all()

    def test_outside_image(self):
        with pytest.raises(EmptyRegion):
            project_region(BBox(5000, 5000, 10, 10), uniform_depth(1.0), INTR)

    def test_single_invalid_marker(self):
        vals = np.full((1080, 1920), 3.0, np.float32)
        vals[101, 102] = np.nan
        d = DepthMap(1920, 1080, vals)
        r = project_region(BBox(100, 100, 5, 5), d, INTR)
        assert (~r.valid).sum() == 1
        assert not r.valid[1, 2]


class TestBoundingRect:
    def test_single_point_degenerate(self):
        vals = np.full((1080, 1920), np.nan, np.float32)
        vals[100, 100] = 4.0
        d = DepthMap(1920, 1080, vals)
        r = project_region(BBox(99, 99, 4, 4), d, INTR)
        rect = bounding_rect(r)
        assert rect.min_x == rect.max_x
        assert rect.min_y == rect.max_y

    def test_minmax_by_hand(self):
        import areatrack.mbtp as m

        r = m.ProjectedRegion(
            u0=0, v0=0,
            X=np.array([[0.0, 3.0], [-1.0, 0.0]]),
            Y=np.array([[0.0, 1.0], [2.0, 0.0]]),
            Z=np.ones((2, 2)),
            valid=np.array([[True, True], [True, False]]),
            box=BBox(0, 0, 2, 2),
        )
        rect = bounding_rect(r)
        assert (rect.min_x, rect.max_x, rect.min_y, rect.max_y) == (-1.0, 3.0, 0.0, 2.0)

    def test_all_invalid(self):
        vals = np.full((1080, 1920), np.nan, np.float32)
        d = DepthMap(1920, 1080, vals)
        r = project_region(BBox(10, 10, 5, 5), d, INTR)
        with pytest.raises(NoValidPoints):
            bounding_rect(r)


class TestTriangleArea:
    def test_right_triangle(self):
        assert triangle_area((0, 0), (2, 0), (0, 3)) == 3.0

    def test_collinear(self):
        assert triangle_area((0, 0), (1, 1), (2, 2)) == 0.0

    def test_matches_shoelace(self):
        pts = [(0.2, 0.1), (1.3, 0.4), (0.7, 2.0)]
        assert triangle_area(*pts) == pytest.approx(shoelace(pts))


class TestPatchArea:
    def test_constant_depth_closed_form(self):
        z = 3.0
        d = uniform_depth(z)
        r = project_region(BBox(200, 200, 10, 10), d, INTR)
        expect = z * z / (INTR.f_u * INTR.f_v)
        for u in range(200, 209):
            for v in range(200, 209):
                assert patch_area(r, u, v) == pytest.approx(expect, rel=1e-12)

    def test_invalid_vertex_skipped(self):
        vals = np.full((1080, 1920), 3.0, np.float32)
        vals[205, 205] = np.nan
        d = DepthMap(1920, 1080, vals)
        r = project_region(BBox(200, 200, 10, 10), d, INTR)
        assert patch_area(r, 205, 205) is None
        assert patch_area(r, 204, 205) is None
        assert patch_area(r, 200, 200) is not None

    def test_ramp_plane_analytic(self):
        # depth linear in v: Z = z0 + s * (v - p_v) / f_v * Z  =>  surface
        # z = z0 / (1 - s*yhat); compare each patch against the analytic
        # projected surface element integrated over the patch footprint
        z0, s = 5.0, 0.2
        vs = np.arange(1080)
        yhat = (vs - INTR.p_v) / INTR.f_v
        col = z0 / (1.0 - s * yhat)
        vals = np.tile(col[:, None], (1, 1920)).astype(np.float64)
        d = DepthMap(1920, 1080, vals)
        r = project_region(BBox(900, 500, 30, 30), d, INTR)
        for (u, v) in [(900, 500), (910, 515), (925, 528)]:
            got = patch_area(r, u, v)
            # exact projected quad area via the shoelace oracle
            i, j = v - r.v0, u - r.u0
            quad = [
                (r.X[i, j], r.Y[i, j]),
                (r.X[i, j + 1], r.Y[i, j + 1]),
                (r.X[i + 1, j + 1], r.Y[i + 1, j + 1]),
                (r.X[i + 1, j], r.Y[i + 1, j]),
            ]
            assert got == pytest.approx(shoelace(quad), rel=1e-9)
            # analytic footprint: dX = Z/f_u du; dY spans between rows
            za = float(vals[v, 0])
            zb = float(vals[v + 1, 0])
            width_avg = 0.5 * (za + zb) / INTR.f_u
            ya = (v - INTR.p_v) / INTR.f_v * za
            yb = (v + 1 - INTR.p_v) / INTR.f_v * zb
            assert got == pytest.approx(width_avg * (yb - ya), rel=1e-5)


class TestEstimateArea:
    def test_fronto_parallel_closed_form(self):
        z = 5.0
        est = estimate_area(BBox(900, 500, 100, 100), uniform_depth(z), INTR, 0.9)
        expect = ELLIPSE_FACTOR * (99 * z / 1000.0) ** 2
        assert est.area_m2 == pytest.approx(expect, rel=1e-9)
        assert est.valid_patch_count == 99 * 99
        assert est.total_patch_count == 99 * 99

    def test_depth_doubling_quadruples_area(self):
        b = BBox(900, 500, 80, 60)
        a1 = estimate_area(b, uniform_depth(5.0), INTR, 0.9).area_m2
        a2 = estimate_area(b, uniform_depth(10.0), INTR, 0.9).area_m2
        assert a2 == pytest.approx(4.0 * a1, rel=1e-9)

    def test_one_pixel_wide_box(self):
        est = estimate_area(BBox(100, 100, 1, 50), uniform_depth(5.0), INTR, 0.9)
        assert est.area_m2 == 0.0
        assert est.valid_patch_count == 0

    def test_scale_law_random_depths(self):
        rng = np.random.default_rng(7)
        b = BBox(800, 400, 50, 40)
        for _ in range(20):
            z = float(rng.uniform(1.0, 30.0))
            a1 = estimate_area(b, uniform_depth(z), INTR, 0.9).area_m2
            a2 = estimate_area(b, uniform_depth(2 * z), INTR, 0.9).area_m2
            assert a2 == pytest.approx(4.0 * a1, rel=1e-9)

    def test_monotone_in_box_size(self):
        d = uniform_depth(6.0)
        prev = 0.0
        for size in (10, 20, 40, 80):
            a = estimate_area(BBox(500, 300, size, size), d, INTR, 0.9).area_m2
            assert a >= prev
            prev = a

    def test_translation_invariance(self):
        d = uniform_depth(6.0)
        ref = estimate_area(BBox(500, 300, 40, 40), d, INTR, 0.9).area_m2
        for (dx, dy) in [(200, 0), (0, 150), (-300, 100)]:
            a = estimate_area(BBox(500 + dx, 300 + dy, 40, 40), d, INTR, 0.9).area_m2
            assert a == pytest.approx(ref, rel=0.01)

    def test_holes_reduce_patch_count_not_crash(self):
        vals = np.full((1080, 1920), 5.0, np.float32)
        vals[510:520, 910:920] = np.nan
        d = DepthMap(1920, 1080, vals)
        est = estimate_area(BBox(900, 500, 50, 50), d, INTR, 0.9)
        assert est.valid_patch_count < est.total_patch_count
        assert est.area_m2 > 0.0
        assert np.isfinite(est.area_m2)

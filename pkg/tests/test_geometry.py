import numpy as np
import pytest
from hypothesis import given, strategies as st

from areatrack.errors import DepthIndexError
from areatrack.geometry import (
    BBox,
    CameraIntrinsics,
    DepthMap,
    MotionTransform,
    clip_to_image,
    iou,
    pixel_grid,
)

INTR = CameraIntrinsics(f_u=1000.0, f_v=1000.0, p_u=960.0, p_v=540.0, width=1920, height=1080)

boxes = st.builds(
    BBox,
    x=st.floats(-50, 50),
    y=st.floats(-50, 50),
    w=st.floats(0, 100),
    h=st.floats(0, 100),
)


class TestIou:
    def test_identical(self):
        b = BBox(0, 0, 2, 2)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 1, 1), BBox(5, 5, 1, 1)) == 0.0

    def test_partial_overlap(self):
        # intersection 1, union 4 + 4 - 1
        assert iou(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)) == pytest.approx(1 / 7)

    def test_degenerate(self):
        assert iou(BBox(0, 0, 0, 0), BBox(0, 0, 0, 0)) == 0.0

    @given(boxes, boxes)
    def test_symmetric(self, a, b):
        assert iou(a, b) == pytest.approx(iou(b, a))

    @given(boxes, boxes)
    def test_bounded(self, a, b):
        assert 0.0 <= iou(a, b) <= 1.0 + 1e-12


class TestClip:
    def test_corner_clamp(self):
        c = clip_to_image(BBox(-5, -5, 10, 10), INTR)
        assert (c.x, c.y, c.w, c.h) == (0, 0, 5, 5)

    def test_interior_unchanged(self):
        b = BBox(100, 100, 50, 50)
        assert clip_to_image(b, INTR) == b

    def test_right_edge(self):
        c = clip_to_image(BBox(1900, 0, 100, 50), INTR)
        assert (c.x, c.y, c.w, c.h) == (1900, 0, 19, 50)

    @given(boxes)
    def test_idempotent(self, b):
        once = clip_to_image(b, INTR)
        assert clip_to_image(once, INTR) == once


class TestDepthMap:
    def test_uniform(self):
        d = DepthMap(4, 3, np.full(12, 5.0))
        assert d.depth_at(0, 0) == 5.0
        assert d.depth_at(3, 2) == 5.0

    def test_nan_invalid(self):
        vals = np.full((5, 5), 2.0)
        vals[3, 3] = np.nan
        d = DepthMap(5, 5, vals)
        assert d.depth_at(3, 3) is None
        assert d.depth_at(2, 3) == 2.0

    def test_nonpositive_invalid(self):
        d = DepthMap(2, 1, np.array([0.0, -1.0]))
        assert d.depth_at(0, 0) is None
        assert d.depth_at(1, 0) is None

    def test_row_major_layout(self):
        w, h = 7, 5
        vals = np.array([u + v for v in range(h) for u in range(w)], dtype=float)
        d = DepthMap(w, h, vals)
        assert d.depth_at(2, 3) == 5.0

    def test_out_of_range_raises(self):
        d = DepthMap(2, 2, np.ones(4))
        with pytest.raises(DepthIndexError):
            d.depth_at(2, 0)
        with pytest.raises(DepthIndexError):
            d.depth_at(0, -1)

    @given(st.integers(1, 8), st.integers(1, 8), st.randoms(use_true_random=False))
    def test_matches_bruteforce_layout(self, w, h, rnd):
        vals = [rnd.uniform(0.1, 9.0) for _ in range(w * h)]
        d = DepthMap(w, h, np.array(vals))
        for v in range(h):
            for u in range(w):
                assert d.depth_at(u, v) == pytest.approx(vals[v * w + u], rel=1e-6)


def test_pixel_grid_floor_ceil():
    u0, u1, v0, v1 = pixel_grid(BBox(10.2, 4.9, 3.0, 2.0), INTR)
    assert (u0, u1, v0, v1) == (10, 14, 4, 7)


def test_motion_transform_singular_rejected():
    from areatrack.errors import SingularTransform

    m = np.eye(3)
    m[0, 0] = 0.0
    m[1, 1] = 0.0
    m[0, 1] = 0.0
    m[1, 0] = 0.0
    with pytest.raises(SingularTransform):
        MotionTransform(m)


def test_motion_transform_roundtrip():
    t = MotionTransform.translation(5, -3)
    x, y = t.apply_point(10, 10)
    xi, yi = t.inverse().apply_point(x, y)
    assert (xi, yi) == pytest.approx((10, 10))

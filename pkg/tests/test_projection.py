import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from areatrack.errors import NoValidDepth
from areatrack.geometry import BBox, CameraIntrinsics, DepthMap
from areatrack.projection import backproject, center_distance, forward_project

INTR = CameraIntrinsics(f_u=1000.0, f_v=1000.0, p_u=960.0, p_v=540.0, width=1920, height=1080)


def test_principal_point_on_axis():
    p = backproject(INTR.p_u, INTR.p_v, 7.0, INTR)
    assert (p.X, p.Y, p.Z) == (0.0, 0.0, 7.0)


def test_direct_evaluation():
    p = backproject(1460, INTR.p_v, 10.0, INTR)
    assert p.X == pytest.approx(5.0)
    assert p.Y == pytest.approx(0.0)


def test_linear_in_depth():
    a = backproject(1200, 700, 4.0, INTR)
    b = backproject(1200, 700, 8.0, INTR)
    assert b.X == pytest.approx(2 * a.X)
    assert b.Y == pytest.approx(2 * a.Y)


def test_invalid_depth_rejected():
    with pytest.raises(ValueError):
        backproject(100, 100, 0.0, INTR)
    with pytest.raises(ValueError):
        backproject(100, 100, float("nan"), INTR)


@given(
    st.floats(0, 1919),
    st.floats(0, 1079),
    st.floats(0.1, 100.0),
)
def test_forward_backward_roundtrip(u, v, z):
    p = backproject(u, v, z, INTR)
    u2, v2 = forward_project(p, INTR)
    assert u2 == pytest.approx(u, abs=1e-9)
    assert v2 == pytest.approx(v, abs=1e-9)


class TestCenterDistance:
    def test_on_axis(self):
        d = DepthMap(1920, 1080, np.full((1080, 1920), 5.0, np.float32))
        b = BBox.from_center(INTR.p_u, INTR.p_v, 40, 40)
        assert center_distance(b, d, INTR) == pytest.approx(5.0)

    def test_off_axis_norm(self):
        d = DepthMap(1920, 1080, np.full((1080, 1920), 10.0, np.float32))
        b = BBox.from_center(INTR.p_u + 500, INTR.p_v, 20, 20)
        assert center_distance(b, d, INTR) == pytest.approx(math.sqrt(125), rel=1e-6)

    def test_median_fallback(self):
        vals = np.full((1080, 1920), 8.0, np.float32)
        vals[530:550, 950:970] = np.nan  # hole over the center
        d = DepthMap(1920, 1080, vals)
        b = BBox.from_center(960, 540, 100, 100)
        assert center_distance(b, d, INTR) == pytest.approx(8.0, rel=1e-3)

    def test_all_invalid_raises(self):
        vals = np.full((1080, 1920), np.nan, np.float32)
        d = DepthMap(1920, 1080, vals)
        with pytest.raises(NoValidDepth):
            center_distance(BBox(100, 100, 50, 50), d, INTR)

    def test_at_least_center_depth(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(1.0, 9.0, (1080, 1920)).astype(np.float32)
        d = DepthMap(1920, 1080, vals)
        for _ in range(20):
            u = rng.uniform(0, 1900)
            v = rng.uniform(0, 1060)
            b = BBox(u, v, 20, 20)
            z = d.depth_at(int(round(min(b.cx, 1919))), int(round(min(b.cy, 1079))))
            assert center_distance(b, d, INTR) >= z - 1e-9

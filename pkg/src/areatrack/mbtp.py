"""Depth-based box area estimation.

The estimator back-projects every pixel of a detection box to the camera
XY plane, bounds the valid points with an axis-aligned rectangle, sums the
areas of per-2x2-pixel triangle pairs inside that rectangle, and scales
the total by pi/4 to account for the roughly elliptical shape of potholes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyRegion, NoValidPoints
from .geometry import BBox, CameraIntrinsics, DepthMap, pixel_grid
from .projection import center_distance

ELLIPSE_FACTOR = math.pi / 4.0

Point2 = tuple[float, float]


@dataclass(frozen=True)
class RectXY:
    """Axis-aligned bounding rectangle in the camera XY plane, meters."""

    min_x: float
    max_x: float
    min_y: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError("rect bounds out of order")

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


@dataclass
class ProjectedRegion:
    """Back-projected pixel grid of a clipped detection box.

    X/Y/Z are (H, W) arrays over integer pixels [v0:v0+H, u0:u0+W];
    ``valid`` marks pixels whose depth was finite and positive.
    """

    u0: int
    v0: int
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    valid: np.ndarray
    box: BBox

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


@dataclass(frozen=True)
class AreaEstimate:
    area_m2: float
    valid_patch_count: int
    total_patch_count: int
    distance_m: float
    confidence: float
    frame: int
    track_id: Optional[int] = None

    @property
    def valid_patch_fraction(self) -> float:
        if self.total_patch_count == 0:
            return 0.0
        return self.valid_patch_count / self.total_patch_count


def project_region(b: BBox, d: DepthMap, intr: CameraIntrinsics) -> ProjectedRegion:
    """Back-project every integer pixel of the clipped box."""
    u0, u1, v0, v1 = pixel_grid(b, intr)
    if u0 >= u1 or v0 >= v1:
        raise EmptyRegion(f"box {b} covers no pixels")
    Z = np.asarray(d.values[v0:v1, u0:u1], dtype=np.float64)
    valid = np.isfinite(Z) & (Z > 0.0)
    us = np.arange(u0, u1, dtype=np.float64)
    vs = np.arange(v0, v1, dtype=np.float64)
    X = (us[None, :] - intr.p_u) / intr.f_u * Z
    Y = (vs[:, None] - intr.p_v) / intr.f_v * Z
    X[~valid] = np.nan
    Y[~valid] = np.nan
    return ProjectedRegion(u0=u0, v0=v0, X=X, Y=Y, Z=Z, valid=valid, box=b)


def bounding_rect(r: ProjectedRegion) -> RectXY:
    """Min/max over X and Y of all valid projected points."""
    if not r.valid.any():
        raise NoValidPoints("region has no valid projected points")
    xs = r.X[r.valid]
    ys = r.Y[r.valid]
    return RectXY(float(xs.min()), float(xs.max()), float(ys.min()), float(ys.max()))


def triangle_area(p1: Point2, p2: Point2, p3: Point2) -> float:
    """Half the absolute cross product of two edge vectors."""
    (x1, y1), (x2, y2), (x3, y3) = p1, p2, p3
    return 0.5 * abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1))


def patch_area(r: ProjectedRegion, u: int, v: int) -> Optional[float]:
    """Area of the 2x2 patch anchored at image pixel (u, v).

    The patch quad (P0..P3) is split into triangles (P0,P1,P2) and
    (P0,P2,P3). Returns None (skipped) when any corner is invalid.
    """
    i = v - r.v0
    j = u - r.u0
    h, w = r.shape
    if not (0 <= i < h - 1 and 0 <= j < w - 1):
        raise IndexError(f"patch ({u}, {v}) outside region grid")
    if not (r.valid[i, j] and r.valid[i, j + 1] and r.valid[i + 1, j] and r.valid[i + 1, j + 1]):
        return None
    p0 = (r.X[i, j], r.Y[i, j])
    p1 = (r.X[i, j + 1], r.Y[i, j + 1])
    p2 = (r.X[i + 1, j], r.Y[i + 1, j])
    p3 = (r.X[i + 1, j + 1], r.Y[i + 1, j + 1])
    return triangle_area(p0, p1, p2) + triangle_area(p0, p2, p3)


def _patch_areas(r: ProjectedRegion) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized triangle-pair areas and validity for all 2x2 patches."""
    X, Y, valid = r.X, r.Y, r.valid
    x0, y0 = X[:-1, :-1], Y[:-1, :-1]
    x1, y1 = X[:-1, 1:], Y[:-1, 1:]
    x2, y2 = X[1:, :-1], Y[1:, :-1]
    x3, y3 = X[1:, 1:], Y[1:, 1:]
    tri1 = 0.5 * np.abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))
    tri2 = 0.5 * np.abs((x2 - x0) * (y3 - y0) - (y2 - y0) * (x3 - x0))
    ok = valid[:-1, :-1] & valid[:-1, 1:] & valid[1:, :-1] & valid[1:, 1:]
    return tri1 + tri2, ok


def estimate_area(
    b: BBox,
    d: DepthMap,
    intr: CameraIntrinsics,
    conf: float,
    frame: int = 0,
    track_id: Optional[int] = None,
) -> AreaEstimate:
    """Full area estimate for one detection box.

    Sums valid 2x2 patch areas whose four projected corners fall inside
    the bounding rectangle (inclusive, which holds by construction), then
    applies the pi/4 ellipse factor. Yields area 0 with zero valid patches
    when no complete patch exists.
    """
    region = project_region(b, d, intr)
    dist = center_distance(b, d, intr)
    h, w = region.shape
    total = max(0, (h - 1)) * max(0, (w - 1))
    if total == 0 or not region.valid.any():
        return AreaEstimate(0.0, 0, total, dist, conf, frame, track_id)
    rect = bounding_rect(region)
    areas, ok = _patch_areas(region)
    if ok.any():
        # inclusive rect membership for all four corners; a no-op for points
        # that define the rect, kept as a guard against future padding changes
        eps = 1e-12
        inx = (region.X >= rect.min_x - eps) & (region.X <= rect.max_x + eps)
        iny = (region.Y >= rect.min_y - eps) & (region.Y <= rect.max_y + eps)
        inrect = inx & iny
        ok = ok & inrect[:-1, :-1] & inrect[:-1, 1:] & inrect[1:, :-1] & inrect[1:, 1:]
    count = int(ok.sum())
    if count == 0:
        return AreaEstimate(0.0, 0, total, dist, conf, frame, track_id)
    area = float(areas[ok].sum()) * ELLIPSE_FACTOR
    return AreaEstimate(area, count, total, dist, conf, frame, track_id)


def cp_baseline_area(b: BBox, d: DepthMap, intr: CameraIntrinsics) -> float:
    """Corner-point baseline: flat rectangle spanned by the two diagonal
    corners of the box, using only their depths. No ellipse factor."""
    region = project_region(b, d, intr)
    h, w = region.shape
    z_tl = region.Z[0, 0] if region.valid[0, 0] else np.nan
    z_br = region.Z[h - 1, w - 1] if region.valid[h - 1, w - 1] else np.nan
    if not (np.isfinite(z_tl) and np.isfinite(z_br)):
        zs = region.Z[region.valid]
        if zs.size == 0:
            raise NoValidPoints("no valid depth at box corners or interior")
        z_tl = z_br = float(np.median(zs))
    x_tl = (region.u0 - intr.p_u) / intr.f_u * z_tl
    y_tl = (region.v0 - intr.p_v) / intr.f_v * z_tl
    x_br = (region.u0 + w - 1 - intr.p_u) / intr.f_u * z_br
    y_br = (region.v0 + h - 1 - intr.p_v) / intr.f_v * z_br
    return abs(x_br - x_tl) * abs(y_br - y_tl)

"""Shared domain types: camera model, depth maps, boxes, motion transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DepthIndexError, SingularTransform


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters, all in pixel units."""

    f_u: float
    f_v: float
    p_u: float
    p_v: float
    width: int
    height: int

    def __post_init__(self):
        if self.f_u <= 0 or self.f_v <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.p_u < self.width and 0 <= self.p_v < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates (corner form)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError("box size must be nonnegative")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)


@dataclass(frozen=True)
class Detection:
    """One detector output: box, score, class (0 = pothole, 1 = manhole)."""

    bbox: BBox
    confidence: float
    class_id: int
    frame: int

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


class DepthMap:
    """Dense per-pixel metric depth for one frame, row-major.

    Non-finite or non-positive entries are allowed and treated as invalid;
    callers decide how to skip them.
    """

    def __init__(self, width: int, height: int, values: np.ndarray):
        values = np.asarray(values, dtype=np.float32)
        if values.size != width * height:
            raise ValueError(
                f"expected {width * height} values, got {values.size}"
            )
        self.width = int(width)
        self.height = int(height)
        self.values = values.reshape(height, width)
        self.values.setflags(write=False)

    def depth_at(self, u: int, v: int) -> Optional[float]:
        """Nearest-integer-pixel depth; None when the stored value is invalid.

        Out-of-range indices are a contract violation and raise.
        """
        if not (0 <= u < self.width and 0 <= v < self.height):
            raise DepthIndexError(f"pixel ({u}, {v}) outside {self.width}x{self.height}")
        z = float(self.values[v, u])
        if not math.isfinite(z) or z <= 0.0:
            return None
        return z

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values) & (self.values > 0.0)


@dataclass(frozen=True)
class MotionTransform:
    """3x3 homogeneous 2D transform between consecutive frames (pixel units)."""

    m: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("transform must be 3x3")
        if abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) <= 1e-9:
            raise SingularTransform("upper-left 2x2 block is singular")
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "MotionTransform":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "MotionTransform":
        m = np.eye(3)
        m[0, 2] = tx
        m[1, 2] = ty
        return cls(m)

    def inverse(self) -> "MotionTransform":
        return MotionTransform(np.linalg.inv(self.m))

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        p = self.m @ np.array([x, y, 1.0])
        return float(p[0] / p[2]), float(p[1] / p[2])

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        """Transform an (N, 2) array of pixel points."""
        pts = np.asarray(pts, dtype=np.float64)
        hom = np.column_stack([pts, np.ones(len(pts))])
        out = hom @ self.m.T
        return out[:, :2] / out[:, 2:3]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union is degenerate."""
    ix = max(0.0, min(a.right, b.right) - max(a.x, b.x))
    iy = max(0.0, min(a.bottom, b.bottom) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def clip_to_image(b: BBox, intr: CameraIntrinsics) -> BBox:
    """Intersect a box with [0, width-1] x [0, height-1]; zero-size if outside."""
    x0 = min(max(b.x, 0.0), intr.width - 1.0)
    y0 = min(max(b.y, 0.0), intr.height - 1.0)
    x1 = min(max(b.right, 0.0), intr.width - 1.0)
    y1 = min(max(b.bottom, 0.0), intr.height - 1.0)
    return BBox(x0, y0, max(0.0, x1 - x0), max(0.0, y1 - y0))


def pixel_grid(b: BBox, intr: CameraIntrinsics) -> tuple[int, int, int, int]:
    """Integer pixel extent (u0, u1, v0, v1) covered by a box, half-open.

    Left/top are floored, right/bottom are ceiled, then clipped to valid
    pixel indices. Returns an empty range (u0 >= u1 or v0 >= v1) when the
    box misses the image.
    """
    u0 = max(0, int(math.floor(b.x)))
    v0 = max(0, int(math.floor(b.y)))
    u1 = min(intr.width, int(math.ceil(b.right)))
    v1 = min(intr.height, int(math.ceil(b.bottom)))
    return u0, u1, v0, v1

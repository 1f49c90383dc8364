"""Multi-object tracking: camera-motion compensation, an 8-dim
constant-velocity Kalman filter per track, two-stage IoU association with
Hungarian assignment, and track lifecycle management."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import OutOfOrderFrame, TooFewCorrespondences
from .geometry import BBox, Detection, MotionTransform, iou


@dataclass(frozen=True)
class TrackerConfig:
    high_conf_threshold: float = 0.5
    low_conf_floor: float = 0.1
    iou_gate_stage1: float = 0.3
    iou_gate_stage2: float = 0.5
    max_misses: int = 30
    min_hits_to_confirm: int = 2
    # noise scales relative to box size (SORT-family heuristic)
    pos_noise_scale: float = 0.05
    vel_noise_scale: float = 0.0125

    def __post_init__(self):
        if not (0.0 <= self.low_conf_floor < self.high_conf_threshold <= 1.0):
            raise ValueError("need 0 <= low_conf_floor < high_conf_threshold <= 1")


@dataclass
class TrackState:
    """Kalman state (x, y, w, h, vx, vy, vw, vh) with 8x8 covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def box(self) -> BBox:
        x, y, w, h = self.mean[:4]
        return BBox.from_center(float(x), float(y), max(0.0, float(w)), max(0.0, float(h)))


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


@dataclass
class Track:
    id: int
    state: TrackState
    class_id: int
    age: int = 0
    misses: int = 0
    hits: int = 1
    status: TrackStatus = TrackStatus.TENTATIVE


_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.hstack([np.eye(4), np.zeros((4, 4))])


def _noise_stds(w: float, h: float, cfg: TrackerConfig) -> np.ndarray:
    s = cfg.pos_noise_scale
    v = cfg.vel_noise_scale
    return np.array([s * w, s * h, s * w, s * h, v * w, v * h, v * w, v * h])


def initiate(z: BBox, cfg: TrackerConfig) -> TrackState:
    mean = np.array([z.cx, z.cy, z.w, z.h, 0.0, 0.0, 0.0, 0.0])
    std = _noise_stds(max(z.w, 1.0), max(z.h, 1.0), cfg)
    std[:4] *= 2.0
    std[4:] *= 10.0
    return TrackState(mean, np.diag(np.square(std)))


def predict(s: TrackState, cfg: TrackerConfig = TrackerConfig()) -> TrackState:
    """One constant-velocity step: mean through F, covariance F P F^T + Q."""
    w, h = max(float(s.mean[2]), 1.0), max(float(s.mean[3]), 1.0)
    q = np.diag(np.square(_noise_stds(w, h, cfg)))
    mean = _F @ s.mean
    cov = _F @ s.covariance @ _F.T + q
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean, cov)


def kf_update(s: TrackState, z: BBox, cfg: TrackerConfig = TrackerConfig()) -> TrackState:
    """Standard linear Kalman measurement update on (cx, cy, w, h)."""
    w, h = max(float(s.mean[2]), 1.0), max(float(s.mean[3]), 1.0)
    r = np.diag(np.square(_noise_stds(w, h, cfg)[:4]))
    zvec = np.array([z.cx, z.cy, z.w, z.h])
    innov = zvec - _H @ s.mean
    S = _H @ s.covariance @ _H.T + r
    K = np.linalg.solve(S.T, _H @ s.covariance.T).T
    mean = s.mean + K @ innov
    cov = (np.eye(8) - K @ _H) @ s.covariance
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean, cov)


def compensate(b: BBox, t: MotionTransform) -> BBox:
    """Map the box center through the inverse transform; size unchanged."""
    inv = t.inverse()
    cx, cy = inv.apply_point(b.cx, b.cy)
    return BBox.from_center(cx, cy, b.w, b.h)


def _fit_affine(src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Least-squares affine mapping src -> dst; None when rank-deficient."""
    n = len(src)
    A = np.column_stack([src, np.ones(n)])
    try:
        coef, _, rank, _ = np.linalg.lstsq(A, dst, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if rank < 3:
        return None
    m = np.eye(3)
    m[:2, :2] = coef[:2].T
    m[:2, 2] = coef[2]
    if abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) <= 1e-9:
        return None
    return m


def fit_motion_ransac(
    correspondences: Sequence[tuple[tuple[float, float], tuple[float, float]]],
    seed: int = 0,
    n_iters: int = 100,
    inlier_px: float = 3.0,
) -> MotionTransform:
    """RANSAC affine fit mapping first points onto second points.

    Refits on the inlier set; falls back to identity when fewer than 3
    inliers support any hypothesis.
    """
    if len(correspondences) < 3:
        raise TooFewCorrespondences(f"need >= 3 pairs, got {len(correspondences)}")
    src = np.array([c[0] for c in correspondences], dtype=np.float64)
    dst = np.array([c[1] for c in correspondences], dtype=np.float64)
    n = len(src)
    rng = np.random.default_rng(seed)
    best_inliers: Optional[np.ndarray] = None
    best_count = 0
    for _ in range(n_iters):
        idx = rng.choice(n, size=3, replace=False)
        m = _fit_affine(src[idx], dst[idx])
        if m is None:
            continue
        pred = src @ m[:2, :2].T + m[:2, 2]
        err = np.linalg.norm(pred - dst, axis=1)
        inliers = err < inlier_px
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
            if count == n:
                break
    if best_inliers is None or best_count < 3:
        return MotionTransform.identity()
    m = _fit_affine(src[best_inliers], dst[best_inliers])
    if m is None:
        return MotionTransform.identity()
    return MotionTransform(m)


def hungarian_solve(cost: np.ndarray) -> list[tuple[int, int]]:
    """Min-cost one-to-one assignment of min(N, M) pairs."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return []
    if not np.isfinite(cost).all():
        raise ValueError("costs must be finite")
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


@dataclass
class AssociationResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)


def _match_stage(
    track_boxes: Sequence[BBox],
    track_idx: list[int],
    dets: Sequence[Detection],
    det_idx: list[int],
    gate: float,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    if not track_idx or not det_idx:
        return [], list(track_idx), list(det_idx)
    cost = np.ones((len(track_idx), len(det_idx)))
    for i, ti in enumerate(track_idx):
        for j, dj in enumerate(det_idx):
            cost[i, j] = 1.0 - iou(track_boxes[ti], dets[dj].bbox)
    matches = []
    matched_t, matched_d = set(), set()
    for i, j in hungarian_solve(cost):
        if 1.0 - cost[i, j] >= gate:
            matches.append((track_idx[i], det_idx[j]))
            matched_t.add(track_idx[i])
            matched_d.add(det_idx[j])
    rest_t = [t for t in track_idx if t not in matched_t]
    rest_d = [d for d in det_idx if d not in matched_d]
    return matches, rest_t, rest_d


def associate(
    track_boxes: Sequence[BBox],
    dets: Sequence[Detection],
    cfg: TrackerConfig,
) -> AssociationResult:
    """Two-stage IoU association.

    Stage 1 matches all tracks against high-confidence detections; stage 2
    lets remaining tracks pick up low-confidence detections (those between
    the floor and the high threshold) under the second gate. Detections
    below the floor are never matched.
    """
    high = [i for i, d in enumerate(dets) if d.confidence >= cfg.high_conf_threshold]
    low = [
        i
        for i, d in enumerate(dets)
        if cfg.low_conf_floor <= d.confidence < cfg.high_conf_threshold
    ]
    all_tracks = list(range(len(track_boxes)))
    m1, rest_t, rest_high = _match_stage(track_boxes, all_tracks, dets, high, cfg.iou_gate_stage1)
    m2, rest_t, rest_low = _match_stage(track_boxes, rest_t, dets, low, cfg.iou_gate_stage2)
    return AssociationResult(
        matches=m1 + m2,
        unmatched_tracks=rest_t,
        unmatched_detections=rest_high + rest_low,
    )


class Tracker:
    """Stateful per-sequence tracker. Single writer: one step() at a time."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def step(
        self,
        frame_dets: Sequence[Detection],
        motion: Optional[MotionTransform] = None,
        frame: Optional[int] = None,
    ) -> list[tuple[int, Detection]]:
        """Process one frame; returns (track_id, detection) for every
        detection assigned to or spawning a track."""
        if frame is None:
            frame = frame_dets[0].frame if frame_dets else (
                self._last_frame + 1 if self._last_frame is not None else 0
            )
        if self._last_frame is not None and frame <= self._last_frame:
            raise OutOfOrderFrame(f"frame {frame} after {self._last_frame}")
        self._last_frame = frame

        live = [t for t in self.tracks if t.status != TrackStatus.DELETED]

        # move tracks into the current frame's pixel coordinates, then predict
        if motion is not None:
            # motion maps previous-frame pixels to current-frame pixels, so
            # track centers are pushed forward through it (the mirror image
            # of compensating detections backward through its inverse)
            for t in live:
                cx, cy = motion.apply_point(float(t.state.mean[0]), float(t.state.mean[1]))
                t.state.mean[0] = cx
                t.state.mean[1] = cy
        for t in live:
            t.state = predict(t.state, self.cfg)
            t.age += 1

        boxes = [t.state.box() for t in live]
        result = associate(boxes, frame_dets, self.cfg)

        out: list[tuple[int, Detection]] = []
        for ti, dj in result.matches:
            t = live[ti]
            det = frame_dets[dj]
            t.state = kf_update(t.state, det.bbox, self.cfg)
            t.hits += 1
            t.misses = 0
            if t.status == TrackStatus.TENTATIVE and t.hits >= self.cfg.min_hits_to_confirm:
                t.status = TrackStatus.CONFIRMED
            out.append((t.id, det))
        for ti in result.unmatched_tracks:
            t = live[ti]
            t.misses += 1
            if t.misses > self.cfg.max_misses:
                t.status = TrackStatus.DELETED
        for dj in result.unmatched_detections:
            det = frame_dets[dj]
            if det.confidence >= self.cfg.high_conf_threshold:
                track = Track(
                    id=self._next_id,
                    state=initiate(det.bbox, self.cfg),
                    class_id=det.class_id,
                )
                self._next_id += 1
                self.tracks.append(track)
                out.append((track.id, det))
        self.tracks = [t for t in self.tracks if t.status != TrackStatus.DELETED]
        out.sort(key=lambda pair: pair[0])
        return out

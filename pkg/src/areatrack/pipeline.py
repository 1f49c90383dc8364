"""End-to-end sequence processing: detections + depth in, tracked and
smoothed area records out."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .cdkf import CdkfConfig, CdkfState
from . import cdkf
from .errors import AreatrackError, NoValidDepth
from .formats import (
    FrameResultRecord,
    SequenceManifest,
    parse_detections,
    parse_motion_file,
    parse_pfm,
)
from .geometry import MotionTransform
from .mbtp import estimate_area
from .metrics import AreaConsistencyReport, area_consistency_report
from .tracking import Tracker, TrackerConfig, fit_motion_ransac

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    cdkf: CdkfConfig = field(default_factory=CdkfConfig)
    smoothing: bool = True
    min_track_len: int = 5
    min_valid_patch_fraction: float = 0.0
    seed: int = 0


class FrameProcessingError(AreatrackError):
    """Wraps a per-frame failure with its frame index."""

    def __init__(self, frame: int, cause: Exception):
        super().__init__(f"frame {frame}: {cause}")
        self.frame = frame
        self.cause = cause


def run_pipeline(
    manifest: SequenceManifest, config: PipelineConfig = PipelineConfig()
) -> tuple[list[FrameResultRecord], AreaConsistencyReport]:
    """Process frames in order through tracking, area estimation, and
    per-track smoothing.

    Per-frame input errors abort with the frame index; a detection whose
    box has no valid depth is skipped with a log line.
    """
    tracker = Tracker(config.tracker)
    states: dict[int, CdkfState] = {}
    records: list[FrameResultRecord] = []

    for entry in manifest.frames:
        try:
            depth = parse_pfm(entry.depth_path.read_bytes())
            dets_by_frame = parse_detections(entry.detections_path.read_text())
            motion = _load_motion(entry.motion_path, config.seed, entry.frame)
        except AreatrackError as e:
            raise FrameProcessingError(entry.frame, e) from e
        except OSError as e:
            raise FrameProcessingError(entry.frame, e) from e
        if depth.width != manifest.intrinsics.width or depth.height != manifest.intrinsics.height:
            raise FrameProcessingError(
                entry.frame,
                ValueError(
                    f"depth {depth.width}x{depth.height} does not match intrinsics"
                ),
            )
        dets = dets_by_frame.get(entry.frame, [])

        assigned = tracker.step(dets, motion=motion, frame=entry.frame)
        for track_id, det in assigned:
            try:
                est = estimate_area(det.bbox, depth, manifest.intrinsics, det.confidence,
                                    frame=entry.frame, track_id=track_id)
            except NoValidDepth:
                log.warning("frame %d track %d: no valid depth, skipping", entry.frame, track_id)
                continue
            if est.valid_patch_fraction < config.min_valid_patch_fraction:
                log.warning(
                    "frame %d track %d: coverage %.2f below threshold, skipping",
                    entry.frame, track_id, est.valid_patch_fraction,
                )
                continue
            smoothed = est.area_m2
            nis = 0.0
            if config.smoothing:
                state = states.get(track_id)
                if state is None or not state.initialized:
                    state = cdkf.update(CdkfState(), est.area_m2, det.confidence,
                                        est.distance_m, config.cdkf)
                else:
                    state = cdkf.predict(state, config.cdkf)
                    state = cdkf.update(state, est.area_m2, det.confidence,
                                        est.distance_m, config.cdkf)
                states[track_id] = state
                smoothed = state.A
                nis = state.last_nis
            records.append(
                FrameResultRecord(
                    frame=entry.frame,
                    track_id=track_id,
                    class_id=det.class_id,
                    bbox=det.bbox,
                    confidence=det.confidence,
                    distance_m=est.distance_m,
                    area_raw_m2=est.area_m2,
                    area_smoothed_m2=smoothed,
                    nis=nis,
                    valid_patch_fraction=est.valid_patch_fraction,
                )
            )
    report = report_from_records(records, min_track_len=config.min_track_len,
                                 smoothed=config.smoothing)
    return records, report


def _load_motion(path, seed: int, frame: int) -> MotionTransform | None:
    if path is None:
        return None
    kind, payload = parse_motion_file(Path(path).read_text())
    if kind == "transform":
        return MotionTransform(payload)
    if len(payload) < 3:
        return None
    # derive a per-frame deterministic RANSAC seed from the run seed
    return fit_motion_ransac(payload, seed=seed * 100003 + frame)


def smooth_records(
    records: list[FrameResultRecord], cfg: CdkfConfig
) -> list[FrameResultRecord]:
    """Re-run per-track smoothing over raw area measurements.

    Lets the tuner try candidate noise weights without repeating tracking
    and area estimation.
    """
    states: dict[int, CdkfState] = {}
    out: list[FrameResultRecord] = []
    for r in sorted(records, key=lambda r: (r.frame, r.track_id)):
        state = states.get(r.track_id)
        if state is None or not state.initialized:
            state = cdkf.update(CdkfState(), r.area_raw_m2, r.confidence, r.distance_m, cfg)
        else:
            state = cdkf.predict(state, cfg)
            state = cdkf.update(state, r.area_raw_m2, r.confidence, r.distance_m, cfg)
        states[r.track_id] = state
        out.append(
            FrameResultRecord(
                frame=r.frame,
                track_id=r.track_id,
                class_id=r.class_id,
                bbox=r.bbox,
                confidence=r.confidence,
                distance_m=r.distance_m,
                area_raw_m2=r.area_raw_m2,
                area_smoothed_m2=state.A,
                nis=state.last_nis,
                valid_patch_fraction=r.valid_patch_fraction,
            )
        )
    return out


def report_from_records(
    records: list[FrameResultRecord],
    min_track_len: int = 5,
    smoothed: bool = True,
    pothole_class_only: bool = True,
) -> AreaConsistencyReport:
    """Per-track consistency metrics over result records.

    Manholes (class 1) flow through tracking and estimation but are
    excluded from the pothole report.
    """
    areas: dict[int, list[float]] = {}
    nis: dict[int, list[float]] = {}
    for r in records:
        if pothole_class_only and r.class_id != 0:
            continue
        value = r.area_smoothed_m2 if smoothed else r.area_raw_m2
        areas.setdefault(r.track_id, []).append(value)
        # the first update of a track has no meaningful innovation
        if len(areas[r.track_id]) > 1:
            nis.setdefault(r.track_id, []).append(r.nis)
    return area_consistency_report(areas, nis, min_track_len=min_track_len)

"""Evaluation metrics: detection quality (P/R/F1/AP), per-track area
consistency (MAE/CV/AFD), filter consistency (NIS), and the combined
tuning objective J."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySeries, TooShort, ZeroMean
from .geometry import BBox, Detection, iou

AP_IOU_THRESHOLDS = [0.5 + 0.05 * i for i in range(10)]  # 0.50 .. 0.95


# ---------------------------------------------------------------------------
# detection metrics


@dataclass(frozen=True)
class DetectionEvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    ap50: float
    ap50_95: float
    iou_thresh: float


def match_for_eval(
    dets: Sequence[Detection], gts: Sequence[BBox], iou_thresh: float
) -> tuple[int, int, int]:
    """Greedy one-to-one matching in descending confidence order."""
    flags = match_flags(dets, gts, iou_thresh)
    tp = sum(flags)
    return tp, len(dets) - tp, len(gts) - tp


def match_flags(
    dets: Sequence[Detection], gts: Sequence[BBox], iou_thresh: float
) -> list[bool]:
    """Per-detection TP flags, ordered by descending confidence.

    Each detection claims the highest-IoU ground truth still unmatched,
    provided that IoU clears the threshold.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    taken = [False] * len(gts)
    flags = []
    for i in order:
        best_j, best_iou = -1, 0.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[i].bbox, g)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_thresh:
            taken[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def average_precision(flags: Sequence[bool], n_gt: int) -> float:
    """101-point interpolated AP from confidence-ranked TP flags."""
    if n_gt == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    ranks = np.arange(1, len(tp) + 1)
    precision = tp / ranks if len(tp) else np.array([])
    recall = tp / n_gt if len(tp) else np.array([])
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r - 1e-12
        p = float(precision[mask].max()) if mask.any() else 0.0
        ap += p / 101.0
    return ap


def evaluate_detections(
    dets: Sequence[Detection], gts: Sequence[BBox], iou_thresh: float = 0.7
) -> DetectionEvalReport:
    """Single-class detection report. Callers exclude manholes upstream."""
    tp, fp, fn = match_for_eval(dets, gts, iou_thresh)
    p, r, f1 = precision_recall_f1(tp, fp, fn)
    aps = {t: average_precision(match_flags(dets, gts, t), len(gts)) for t in AP_IOU_THRESHOLDS}
    return DetectionEvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=p,
        recall=r,
        f1=f1,
        ap50=aps[0.5],
        ap50_95=sum(aps.values()) / len(aps),
        iou_thresh=iou_thresh,
    )


def evaluate_detections_per_frame(
    dets_by_frame: dict[int, list[Detection]],
    gts_by_frame: dict[int, list[BBox]],
    iou_thresh: float = 0.7,
) -> DetectionEvalReport:
    """Pools per-frame matches into one ranked list before AP integration."""
    frames = sorted(set(dets_by_frame) | set(gts_by_frame))
    tp = fp = fn = n_gt = 0
    ranked: list[tuple[float, dict[float, bool]]] = []
    for f in frames:
        dets = dets_by_frame.get(f, [])
        gts = gts_by_frame.get(f, [])
        n_gt += len(gts)
        t, fpp, fnn = match_for_eval(dets, gts, iou_thresh)
        tp, fp, fn = tp + t, fp + fpp, fn + fnn
        per_thresh = {t_: match_flags(dets, gts, t_) for t_ in AP_IOU_THRESHOLDS}
        order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
        for rank, i in enumerate(order):
            ranked.append(
                (dets[i].confidence, {t_: per_thresh[t_][rank] for t_ in AP_IOU_THRESHOLDS})
            )
    ranked.sort(key=lambda pair: -pair[0])
    aps = {
        t_: average_precision([fl[t_] for _, fl in ranked], n_gt)
        for t_ in AP_IOU_THRESHOLDS
    }
    p, r, f1 = precision_recall_f1(tp, fp, fn)
    return DetectionEvalReport(
        tp=tp, fp=fp, fn=fn, precision=p, recall=r, f1=f1,
        ap50=aps[0.5], ap50_95=sum(aps.values()) / len(aps), iou_thresh=iou_thresh,
    )


# ---------------------------------------------------------------------------
# area consistency metrics


def area_mae(series: Sequence[float]) -> float:
    """Mean absolute deviation from the series mean."""
    if len(series) == 0:
        raise EmptySeries("MAE of empty series")
    a = np.asarray(series, dtype=np.float64)
    return float(np.mean(np.abs(a - a.mean())))


def area_cv(series: Sequence[float]) -> float:
    """Population standard deviation over mean."""
    if len(series) == 0:
        raise EmptySeries("CV of empty series")
    a = np.asarray(series, dtype=np.float64)
    mean = a.mean()
    if mean <= 0.0:
        raise ZeroMean(f"CV undefined for mean {mean}")
    return float(np.sqrt(np.mean((a - mean) ** 2)) / mean)


def area_afd(series: Sequence[float]) -> float:
    """Mean absolute difference between consecutive estimates."""
    if len(series) < 2:
        raise TooShort("AFD needs at least two elements")
    a = np.asarray(series, dtype=np.float64)
    return float(np.mean(np.abs(np.diff(a))))


def nis_aggregate(per_update_nis: Sequence[float]) -> float:
    if len(per_update_nis) == 0:
        raise EmptySeries("NIS of empty series")
    return float(np.mean(per_update_nis))


def objective_j(mae: float, cv: float, afd: float, nis: float) -> float:
    """Combined filter-quality objective: 10*MAE + CV + AFD + NIS."""
    return 10.0 * mae + cv + afd + nis


@dataclass(frozen=True)
class TrackAreaStats:
    track_id: int
    n: int
    mean_area: float
    mae: float
    cv: float
    afd: float
    nis_mean: Optional[float]


@dataclass
class AreaConsistencyReport:
    """Unweighted per-track averages; tracks shorter than min_track_len
    are excluded."""

    mae: float
    cv: float
    afd: float
    nis_mean: float
    track_count: int
    min_track_len: int
    per_track: list[TrackAreaStats] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return objective_j(self.mae, self.cv, self.afd, self.nis_mean)


def area_consistency_report(
    areas_by_track: dict[int, Sequence[float]],
    nis_by_track: Optional[dict[int, Sequence[float]]] = None,
    min_track_len: int = 5,
) -> AreaConsistencyReport:
    per_track: list[TrackAreaStats] = []
    for tid in sorted(areas_by_track):
        series = list(areas_by_track[tid])
        if len(series) < min_track_len:
            continue
        nis_series = list(nis_by_track.get(tid, [])) if nis_by_track else []
        nis_mean = float(np.mean(nis_series)) if nis_series else None
        mean = float(np.mean(series))
        cv = area_cv(series) if mean > 0 else 0.0
        per_track.append(
            TrackAreaStats(
                track_id=tid,
                n=len(series),
                mean_area=mean,
                mae=area_mae(series),
                cv=cv,
                afd=area_afd(series),
                nis_mean=nis_mean,
            )
        )
    if not per_track:
        return AreaConsistencyReport(0.0, 0.0, 0.0, 0.0, 0, min_track_len, [])
    nis_vals = [t.nis_mean for t in per_track if t.nis_mean is not None]
    return AreaConsistencyReport(
        mae=float(np.mean([t.mae for t in per_track])),
        cv=float(np.mean([t.cv for t in per_track])),
        afd=float(np.mean([t.afd for t in per_track])),
        nis_mean=float(np.mean(nis_vals)) if nis_vals else 0.0,
        track_count=len(per_track),
        min_track_len=min_track_len,
        per_track=per_track,
    )

"""Pixel- and frame-level metric accumulation and per-category aggregation.

IoU/precision/recall pool pixel counts over a whole video, then per-video
scores are averaged (unweighted) within each category; overall averages over
all videos, not over the two category means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, LeaksegError

CATEGORY_WITHOUT = "without_interference"
CATEGORY_WITH = "with_interference"
CATEGORY_OVERALL = "overall"


class EvalError(LeaksegError):
    pass


@dataclass
class VideoMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    frame_tp: int = 0
    frame_tn: int = 0
    frame_fp: int = 0
    frame_fn: int = 0
    frames_evaluated: int = 0

    def add(self, tp: int, fp: int, fn: int, frame_pred: bool, frame_gt: bool):
        self.tp += tp
        self.fp += fp
        self.fn += fn
        if frame_pred and frame_gt:
            self.frame_tp += 1
        elif frame_pred and not frame_gt:
            self.frame_fp += 1
        elif not frame_pred and frame_gt:
            self.frame_fn += 1
        else:
            self.frame_tn += 1
        self.frames_evaluated += 1


def frame_confusion(pred: BinaryMask, gt: BinaryMask):
    """Pixel confusion counts plus the frame-level (pred, gt) label pair.

    A frame is positive when it contains any positive pixel.
    """
    if pred.bits.shape != gt.bits.shape:
        raise EvalError(f"pred {pred.bits.shape} vs gt {gt.bits.shape}")
    tp = int(np.count_nonzero(pred.bits & gt.bits))
    fp = int(np.count_nonzero(pred.bits & ~gt.bits))
    fn = int(np.count_nonzero(~pred.bits & gt.bits))
    return tp, fp, fn, (bool(pred.bits.any()), bool(gt.bits.any()))


def video_scores(m: VideoMetrics) -> tuple[float, float, float, float]:
    """(iou, precision, recall, fla); empty denominators score 1.0."""
    if m.frames_evaluated <= 0:
        raise EvalError("no frames evaluated")
    iou = m.tp / (m.tp + m.fp + m.fn) if (m.tp + m.fp + m.fn) else 1.0
    precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) else 1.0
    recall = m.tp / (m.tp + m.fn) if (m.tp + m.fn) else 1.0
    fla = (m.frame_tp + m.frame_tn) / m.frames_evaluated
    return iou, precision, recall, fla


@dataclass(frozen=True)
class CategoryReport:
    mean_iou: float
    mean_precision: float
    mean_recall: float
    mean_fla: float
    videos: int


def _mean_report(scores: list[tuple[float, float, float, float]]) -> CategoryReport:
    arr = np.asarray(scores, dtype=np.float64)
    means = arr.mean(axis=0)
    return CategoryReport(
        mean_iou=float(means[0]),
        mean_precision=float(means[1]),
        mean_recall=float(means[2]),
        mean_fla=float(means[3]),
        videos=len(scores),
    )


def aggregate(videos: list[tuple[VideoMetrics, bool]]) -> dict[str, CategoryReport | None]:
    """Per-category unweighted means of per-video scores.

    Returns {without_interference, with_interference, overall}; a category
    with no videos maps to None. `overall` averages over all videos.
    """
    without = [video_scores(m) for m, interf in videos if not interf]
    with_ = [video_scores(m) for m, interf in videos if interf]
    everything = [video_scores(m) for m, _ in videos]
    return {
        CATEGORY_WITHOUT: _mean_report(without) if without else None,
        CATEGORY_WITH: _mean_report(with_) if with_ else None,
        CATEGORY_OVERALL: _mean_report(everything) if everything else None,
    }

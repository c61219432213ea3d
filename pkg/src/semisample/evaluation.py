"""Detection evaluation: greedy matching and interpolated average precision.

AP is computed per category from a score-ranked sweep over all frames:
each prediction greedily claims the unmatched groundtruth box with the
highest 3D IoU at or above the category threshold. Interpolated precision
p(r) is the maximum precision at recall >= r, sampled at R evenly spaced
recall positions {1/R, ..., 1}. The mean AP averages categories that have
at least one groundtruth box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .geometry import iou_3d
from .pointcloud_io import Label

DEFAULT_RECALL_POSITIONS = 40


@dataclass(frozen=True)
class ApResult:
    per_category: dict[str, float]
    mean_ap: float


def _threshold_for(category: str, thresholds) -> float:
    if isinstance(thresholds, Mapping):
        if category not in thresholds:
            raise InputError(f"no IoU threshold supplied for category {category!r}")
        t = float(thresholds[category])
    else:
        t = float(thresholds)
    if not 0.0 < t <= 1.0:
        raise InputError(f"IoU threshold must be in (0, 1], got {t}")
    return t


def match_frame(
    predictions: Sequence[Label],
    groundtruth: Sequence[Label],
    iou_threshold: float,
) -> list[bool]:
    """True-positive flag per prediction, processed in descending score order.

    Predictions and groundtruth must share one category. Each groundtruth
    box is claimed at most once; ties on IoU go to the lowest gt index.
    """
    order = sorted(range(len(predictions)), key=lambda i: -_score_of(predictions[i], i))
    taken = [False] * len(groundtruth)
    flags = [False] * len(predictions)
    for i in order:
        best_iou = 0.0
        best_j = -1
        for j, gt in enumerate(groundtruth):
            if taken[j]:
                continue
            iou = iou_3d(predictions[i].box, gt.box)
            if iou >= iou_threshold and iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            flags[i] = True
    return flags


def _score_of(label: Label, index: int) -> float:
    if label.score is None:
        raise InputError(f"prediction {index} has no score; AP needs ranked predictions")
    return label.score


def evaluate_ap(
    predictions: Mapping[str, Sequence[Label]],
    groundtruth: Mapping[str, Sequence[Label]],
    iou_thresholds,
    recall_positions: int = DEFAULT_RECALL_POSITIONS,
) -> ApResult:
    """Per-category AP and the mean over categories with groundtruth.

    Args:
        predictions: frame id -> scored labels.
        groundtruth: frame id -> labels (all frames to evaluate, even when
            they received no predictions).
        iou_thresholds: per-category mapping, or one float for all.
        recall_positions: number R of evenly spaced recall sample points.
    """
    if recall_positions < 1:
        raise InputError(f"recall_positions must be >= 1, got {recall_positions}")

    categories: list[str] = []
    for frame_labels in groundtruth.values():
        for lb in frame_labels:
            if lb.category not in categories:
                categories.append(lb.category)

    per_category: dict[str, float] = {}
    for category in categories:
        threshold = _threshold_for(category, iou_thresholds)
        total_gt = 0
        scores: list[float] = []
        flags: list[bool] = []
        for frame_id, gt_labels in groundtruth.items():
            gts = [lb for lb in gt_labels if lb.category == category]
            total_gt += len(gts)
            preds = [lb for lb in predictions.get(frame_id, ()) if lb.category == category]
            frame_flags = match_frame(preds, gts, threshold)
            scores.extend(_score_of(p, i) for i, p in enumerate(preds))
            flags.extend(frame_flags)
        per_category[category] = _average_precision(scores, flags, total_gt, recall_positions)

    mean_ap = float(np.mean(list(per_category.values()))) if per_category else 0.0
    return ApResult(per_category=per_category, mean_ap=mean_ap)


def _average_precision(
    scores: Sequence[float], flags: Sequence[bool], total_gt: int, recall_positions: int
) -> float:
    if total_gt == 0:
        return 0.0
    if not scores:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    tp = np.asarray(flags, dtype=np.float64)[order]
    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(tp) + 1, dtype=np.float64)
    precision = cum_tp / ranks
    recall = cum_tp / float(total_gt)
    # max precision at any recall >= r == suffix maximum in rank order
    suffix_max = np.maximum.accumulate(precision[::-1])[::-1]
    acc = 0.0
    for i in range(1, recall_positions + 1):
        r = i / recall_positions
        pos = np.searchsorted(recall, r, side="left")
        if pos < len(recall):
            acc += suffix_max[pos]
    return acc / recall_positions

"""Desk-scale teacher-student simulation around the augmentation pipeline.

No neural networks: the "detector" perturbs the hidden true annotations of
a frame with noise that shrinks as a scalar skill rises, and the student's
skill improves with the balance of correct versus wrong supervision it
receives. The point is to exercise the full pipeline (pseudo labels,
databases, sample pasting, fade, EMA, AP evaluation) with measurable,
deterministic dynamics, not to model SGD.

Conventions: the teacher always detects on the clean unlabeled frame; the
student consumes the augmented one. The pseudo database is built once from
the initial teacher's detections and stays fixed for the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .augmentor import (
    AugmentationConfig,
    augment_labeled_frame,
    augment_unlabeled_frame,
)
from .errors import InputError, NotFoundError
from .evaluation import ApResult, evaluate_ap, match_frame
from .geometry import OrientedBox3D, normalize_yaw
from .pointcloud_io import Label, LabelSource, RunManifest, read_labels
from .rng import DetRng
from .sample_db import build_gt_database, build_pseudo_database

TRUTH_SUFFIX = ".truth"

DEFAULT_EMA_ALPHA = 0.999


@dataclass(frozen=True)
class ModelState:
    """Abstract weights; skill is the squashed mean of the parameter vector."""

    params: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.params, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("model params must be a non-empty 1-D vector")
        if not np.isfinite(arr).all():
            raise InputError("model params must be finite")
        object.__setattr__(self, "params", arr)

    @property
    def skill(self) -> float:
        return 1.0 / (1.0 + math.exp(-float(np.mean(self.params))))

    @classmethod
    def from_skill(cls, skill: float, dim: int = 8) -> "ModelState":
        s = min(max(float(skill), 1e-6), 1.0 - 1e-6)
        return cls(np.full(dim, math.log(s / (1.0 - s))))


def ema_update(teacher: ModelState, student: ModelState, alpha: float) -> ModelState:
    """New teacher params: alpha * teacher + (1 - alpha) * student, elementwise."""
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"ema alpha must be in [0, 1], got {alpha}")
    if teacher.params.shape != student.params.shape:
        raise InputError(
            f"param length mismatch: {teacher.params.shape} vs {student.params.shape}"
        )
    return ModelState(alpha * teacher.params + (1.0 - alpha) * student.params)


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic detector error model; all noise scales with (1 - skill).

    True positives score around tp_score_base minus a penalty growing with
    the center perturbation; false positives score around fp_score_mean.
    """

    center_sigma: float = 0.4
    size_sigma: float = 0.1
    yaw_sigma: float = 0.15
    drop_rate: float = 0.2
    fp_rate: float = 1.0
    tp_score_base: float = 0.9
    tp_score_slope: float = 0.25
    fp_score_mean: float = 0.25
    score_jitter: float = 0.1

    def __post_init__(self):
        for name in ("center_sigma", "size_sigma", "yaw_sigma", "fp_rate", "score_jitter"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be >= 0")
        if not 0.0 <= self.drop_rate <= 1.0:
            raise InputError(f"drop_rate must be in [0, 1], got {self.drop_rate}")

    def score(self, is_true_positive: bool, perturbation: float, rng: DetRng) -> float:
        jitter = rng.uniform(-self.score_jitter, self.score_jitter)
        if is_true_positive:
            raw = self.tp_score_base - self.tp_score_slope * perturbation + jitter
        else:
            raw = self.fp_score_mean + jitter
        return min(1.0, max(0.0, raw))


_FP_SIZE_RANGES = ((0.5, 4.5), (0.5, 2.5), (0.5, 2.5))


def synthetic_detect(
    groundtruth: Sequence[Label],
    noise: NoiseModel,
    skill: float,
    rng: DetRng,
    categories: Sequence[str] | None = None,
) -> list[Label]:
    """Simulated detections: perturbed survivors plus Poisson false positives."""
    scale = 1.0 - min(max(skill, 0.0), 1.0)
    detections: list[Label] = []
    for lb in groundtruth:
        if rng.random() < noise.drop_rate * scale:
            continue
        nx = rng.normal(0.0, noise.center_sigma * scale)
        ny = rng.normal(0.0, noise.center_sigma * scale)
        nz = rng.normal(0.0, noise.center_sigma * scale)
        sizes = tuple(
            max(0.05, d + rng.normal(0.0, noise.size_sigma * scale)) for d in lb.box.size
        )
        yaw = normalize_yaw(lb.box.yaw + rng.normal(0.0, noise.yaw_sigma * scale))
        center = (lb.box.center[0] + nx, lb.box.center[1] + ny, lb.box.center[2] + nz)
        perturbation = math.sqrt(nx * nx + ny * ny + nz * nz)
        score = noise.score(True, perturbation, rng)
        detections.append(Label(lb.category, OrientedBox3D(center, sizes, yaw), score, LabelSource.PSEUDO))

    cats = list(categories) if categories else sorted({lb.category for lb in groundtruth})
    if not cats:
        cats = ["object"]
    lo, hi = _fp_region(groundtruth)
    n_fp = rng.poisson(noise.fp_rate)
    for _ in range(n_fp):
        category = cats[rng.randbelow(len(cats))]
        center = (
            rng.uniform(lo[0], hi[0]),
            rng.uniform(lo[1], hi[1]),
            rng.uniform(lo[2], hi[2]),
        )
        sizes = tuple(rng.uniform(a, b) for a, b in _FP_SIZE_RANGES)
        yaw = rng.uniform(-math.pi, math.pi)
        score = noise.score(False, 0.0, rng)
        detections.append(Label(category, OrientedBox3D(center, sizes, yaw), score, LabelSource.PSEUDO))
    return detections


def _fp_region(groundtruth: Sequence[Label]):
    if not groundtruth:
        return (-20.0, -20.0, -1.0), (20.0, 20.0, 3.0)
    xs = [lb.box.center[0] for lb in groundtruth]
    ys = [lb.box.center[1] for lb in groundtruth]
    zs = [lb.box.center[2] for lb in groundtruth]
    pad = 10.0
    return (
        (min(xs) - pad, min(ys) - pad, min(zs) - 1.0),
        (max(xs) + pad, max(ys) + pad, max(zs) + 1.0),
    )


def filter_pseudo_labels(detections: Sequence[Label], thresholds) -> list[Label]:
    """Keep detections whose score strictly exceeds their category threshold."""
    kept = []
    for i, lb in enumerate(detections):
        if lb.score is None:
            raise InputError(f"detection {i} has no score")
        if isinstance(thresholds, Mapping):
            if lb.category not in thresholds:
                raise InputError(f"no threshold supplied for category {lb.category!r}")
            tau = float(thresholds[lb.category])
        else:
            tau = float(thresholds)
        if not 0.0 <= tau <= 1.0:
            raise InputError(f"threshold must be in [0, 1], got {tau}")
        if lb.score > tau:
            kept.append(lb)
    return kept


@dataclass(frozen=True)
class SimulationConfig:
    """Scenario shape for one simulated run."""

    augmentation: AugmentationConfig
    noise: NoiseModel = field(default_factory=NoiseModel)
    epochs: int = 10
    labeled_batch: int = 4
    unlabeled_batch: int = 8
    ema_alpha: float = DEFAULT_EMA_ALPHA
    teacher_filter_tau: float | Mapping[str, float] = 0.3
    eval_iou_thresholds: float | Mapping[str, float] = 0.25
    recall_positions: int = 40
    improve_rate: float = 0.05
    initial_teacher_skill: float = 0.6
    initial_student_skill: float = 0.5
    param_dim: int = 8
    pseudo_db_min_score: float = 0.0
    db_min_points: int = 5
    use_masks_for_gt_db: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise InputError(f"epochs must be >= 1, got {self.epochs}")
        if self.labeled_batch < 0 or self.unlabeled_batch < 0:
            raise InputError("batch sizes must be >= 0")
        if not 0.0 <= self.ema_alpha <= 1.0:
            raise InputError(f"ema_alpha must be in [0, 1], got {self.ema_alpha}")
        if self.recall_positions < 1:
            raise InputError("recall_positions must be >= 1")
        if self.param_dim < 1:
            raise InputError("param_dim must be >= 1")


def load_truth(manifest: RunManifest, frame_id: str) -> list[Label]:
    """Hidden true annotations of an unlabeled or eval frame."""
    path = Path(manifest.root) / f"{frame_id}{TRUTH_SUFFIX}"
    if not path.is_file():
        raise NotFoundError(f"truth file not found: {path}")
    labels = read_labels(path.read_text())
    return [Label(lb.category, lb.box, None, LabelSource.GROUNDTRUTH) for lb in labels]


def _match_count(predictions: Sequence[Label], truth: Sequence[Label], thresholds) -> int:
    """Number of predictions matching an unclaimed true box of their category."""
    matched = 0
    categories = {lb.category for lb in predictions}
    for category in sorted(categories):
        preds = [lb for lb in predictions if lb.category == category]
        gts = [lb for lb in truth if lb.category == category]
        if isinstance(thresholds, Mapping):
            if category not in thresholds:
                raise InputError(f"no IoU threshold supplied for category {category!r}")
            thr = float(thresholds[category])
        else:
            thr = float(thresholds)
        matched += sum(match_frame(preds, gts, thr))
    return matched


@dataclass
class EpochMetrics:
    epoch: int
    teacher_skill: float
    student_skill: float
    pseudo_precision: float
    pseudo_recall: float
    num_pseudo_labels: int
    collision_anchor_count: int
    paste_counts: dict[str, int]
    mean_ap: float
    ap_per_category: dict[str, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "teacher_skill": self.teacher_skill,
                "student_skill": self.student_skill,
                "pseudo_precision": self.pseudo_precision,
                "pseudo_recall": self.pseudo_recall,
                "num_pseudo_labels": self.num_pseudo_labels,
                "collision_anchor_count": self.collision_anchor_count,
                "paste_counts": self.paste_counts,
                "mean_ap": self.mean_ap,
                "ap_per_category": self.ap_per_category,
            },
            sort_keys=True,
        )


_STRATEGY_KEYS = ("gt_on_labeled", "pseudo_on_labeled", "gt_on_unlabeled", "pseudo_on_unlabeled")


def run_simulation(
    cfg: SimulationConfig,
    manifest: RunManifest,
    seed: int,
    metrics_path=None,
) -> list[EpochMetrics]:
    """Run the teacher-student loop and return (and optionally append) metrics.

    Per epoch: the teacher detects on clean unlabeled frames; detections are
    filtered into pseudo labels; labeled and unlabeled frames are augmented
    (fade respected); the student improves with its supervision balance; the
    teacher follows by EMA; teacher mAP is measured on the eval split.

    All randomness derives from ``seed``; the augmentation config's own seed
    field is ignored here.
    """
    if not manifest.labeled_frames:
        raise InputError("manifest has no labeled frames")
    if not manifest.unlabeled_frames:
        raise InputError("manifest has no unlabeled frames")

    labeled = [manifest.load_frame(fid) for fid in manifest.labeled_frames]
    unlabeled = [manifest.load_frame(fid) for fid in manifest.unlabeled_frames]
    truth = {fid: load_truth(manifest, fid) for fid in manifest.unlabeled_frames}
    eval_ids = list(manifest.eval_frames) or list(manifest.unlabeled_frames)
    eval_truth = {
        fid: (truth[fid] if fid in truth else load_truth(manifest, fid)) for fid in eval_ids
    }

    teacher = ModelState.from_skill(cfg.initial_teacher_skill, cfg.param_dim)
    student = ModelState.from_skill(cfg.initial_student_skill, cfg.param_dim)

    gt_db = build_gt_database(
        labeled,
        use_masks=cfg.use_masks_for_gt_db,
        min_points=cfg.db_min_points,
        categories=manifest.categories,
        source_manifest_hash=manifest.content_hash,
    )
    initial_detections = {
        frame.frame_id: synthetic_detect(
            truth[frame.frame_id],
            cfg.noise,
            teacher.skill,
            DetRng.from_key(seed, "dbgen", frame.frame_id),
            manifest.categories,
        )
        for frame in unlabeled
    }
    pseudo_db = build_pseudo_database(
        unlabeled,
        initial_detections,
        min_score=cfg.pseudo_db_min_score,
        min_points=cfg.db_min_points,
        categories=manifest.categories,
        source_manifest_hash=manifest.content_hash,
    )
    sample_quality = _pseudo_sample_quality(initial_detections, truth, cfg.eval_iou_thresholds)

    total_frames = len(labeled) + len(unlabeled)
    history: list[EpochMetrics] = []
    out = None
    if metrics_path is not None:
        out = open(metrics_path, "a")
    try:
        for epoch in range(cfg.epochs):
            pseudo: dict[str, list[Label]] = {}
            tp_total = 0
            kept_total = 0
            truth_total = 0
            for frame in unlabeled:
                det = synthetic_detect(
                    truth[frame.frame_id],
                    cfg.noise,
                    teacher.skill,
                    DetRng.from_key(seed, "detect", frame.frame_id, epoch),
                    manifest.categories,
                )
                kept = filter_pseudo_labels(det, cfg.teacher_filter_tau)
                pseudo[frame.frame_id] = kept
                tp_total += _match_count(kept, truth[frame.frame_id], cfg.eval_iou_thresholds)
                kept_total += len(kept)
                truth_total += len(truth[frame.frame_id])

            paste_counts = {k: 0 for k in _STRATEGY_KEYS}
            anchor_count = 0
            correct = 0
            wrong = 0
            for frame in labeled:
                af = augment_labeled_frame(
                    frame,
                    gt_db,
                    pseudo_db,
                    cfg.augmentation,
                    epoch,
                    DetRng.from_key(seed, frame.frame_id, epoch),
                )
                for placed in af.report.placed:
                    src = placed.label.source
                    if src == LabelSource.PASTED_GT:
                        paste_counts["gt_on_labeled"] += 1
                        correct += 1
                    else:
                        paste_counts["pseudo_on_labeled"] += 1
                        key = _quality_key(placed.label, placed.source_frame)
                        if sample_quality.get(key, False):
                            correct += 1
                        else:
                            wrong += 1
                correct += sum(1 for lb in af.supervising_labels if lb.source == LabelSource.GROUNDTRUTH)
            for frame in unlabeled:
                af = augment_unlabeled_frame(
                    frame,
                    pseudo[frame.frame_id],
                    gt_db,
                    pseudo_db,
                    cfg.augmentation,
                    epoch,
                    DetRng.from_key(seed, frame.frame_id, epoch),
                )
                anchor_count += len(af.collision_anchors)
                for placed in af.report.placed:
                    if placed.label.source == LabelSource.PASTED_GT:
                        paste_counts["gt_on_unlabeled"] += 1
                    else:
                        paste_counts["pseudo_on_unlabeled"] += 1
                matched = _match_count(
                    pseudo[frame.frame_id], truth[frame.frame_id], cfg.eval_iou_thresholds
                )
                correct += matched
                wrong += len(pseudo[frame.frame_id]) - matched

            gain = cfg.improve_rate * (correct - wrong) / max(total_frames, 1)
            student = ModelState(student.params + gain)
            teacher = ema_update(teacher, student, cfg.ema_alpha)

            eval_preds = {
                fid: synthetic_detect(
                    eval_truth[fid],
                    cfg.noise,
                    teacher.skill,
                    DetRng.from_key(seed, "eval", fid, epoch),
                    manifest.categories,
                )
                for fid in eval_ids
            }
            ap: ApResult = evaluate_ap(
                eval_preds, eval_truth, cfg.eval_iou_thresholds, cfg.recall_positions
            )

            metrics = EpochMetrics(
                epoch=epoch,
                teacher_skill=teacher.skill,
                student_skill=student.skill,
                pseudo_precision=(tp_total / kept_total) if kept_total else 1.0,
                pseudo_recall=(tp_total / truth_total) if truth_total else 1.0,
                num_pseudo_labels=kept_total,
                collision_anchor_count=anchor_count,
                paste_counts=paste_counts,
                mean_ap=ap.mean_ap,
                ap_per_category=dict(sorted(ap.per_category.items())),
            )
            history.append(metrics)
            if out is not None:
                out.write(metrics.to_json() + "\n")
    finally:
        if out is not None:
            out.close()
    return history


def _quality_key(label: Label, source_frame: str):
    return (source_frame, label.category, label.box.as_row())


def _pseudo_sample_quality(detections, truth, thresholds) -> dict:
    """Whether each initial detection matches a true box in its source frame."""
    quality: dict = {}
    for frame_id, dets in detections.items():
        gts = truth[frame_id]
        categories = {lb.category for lb in dets}
        for category in sorted(categories):
            preds = [lb for lb in dets if lb.category == category]
            cat_gts = [lb for lb in gts if lb.category == category]
            if isinstance(thresholds, Mapping):
                thr = float(thresholds.get(category, 0.25))
            else:
                thr = float(thresholds)
            flags = match_frame(preds, cat_gts, thr)
            for lb, ok in zip(preds, flags):
                quality[_quality_key(lb, frame_id)] = ok
    return quality

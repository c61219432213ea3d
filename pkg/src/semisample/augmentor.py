"""The sample-paste engine.

Pulls gt and pseudo samples from their databases, plans collision-free
placements against the frame's existing boxes, and pastes the accepted
samples' points into the frame. Four independent strategies: gt or pseudo
samples onto labeled or unlabeled frames.

Placement is greedy first-fit in shuffled-category order; rejected
candidates are dropped, never relocated. Samples keep the world
coordinates of their source frame.

On unlabeled frames the thresholded pseudo labels act only as collision
anchors; neither they nor the pasted samples' labels are ever returned as
supervision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .geometry import (
    OrientedBox3D,
    PointCloud,
    bev_overlap_params,
    bev_params,
    points_in_box_mask,
)
from .pointcloud_io import Frame, Label, LabelSource
from .rng import DetRng
from .sample_db import DatabaseView, ObjectSample, SampleDatabase, draw_samples, filter_by_score


class CollisionMode(str, Enum):
    BEV = "bev"
    FULL3D = "full3d"


# tau values follow the common outdoor setup for car/pedestrian/cyclist.
OUTDOOR_SAMPLES_PER_CATEGORY = {"car": 15, "pedestrian": 10, "cyclist": 10}
OUTDOOR_TAU_PSEUDO_SAMPLE = {"car": 0.8, "pedestrian": 0.7, "cyclist": 0.7}
DEFAULT_TAU_UNLABELED_FRAME = 0.5
INDOOR_SAMPLES_PER_CATEGORY_DEFAULT = 2


@dataclass(frozen=True)
class AugmentationConfig:
    """Everything that controls one augmentation run.

    The four booleans select which sample kinds go onto which frame kinds.
    Thresholds compare strictly: a sample is used only when score > tau.
    """

    samples_per_category: Mapping[str, int]
    tau_pseudo_sample: Mapping[str, float] = field(default_factory=dict)
    tau_unlabeled_frame: float = DEFAULT_TAU_UNLABELED_FRAME
    gt_on_labeled: bool = True
    pseudo_on_labeled: bool = False
    gt_on_unlabeled: bool = False
    pseudo_on_unlabeled: bool = False
    collision_mode: CollisionMode = CollisionMode.BEV
    category_shuffle: bool = True
    fade_epoch: int | None = None
    remove_occluded_points: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "samples_per_category", dict(self.samples_per_category))
        object.__setattr__(self, "tau_pseudo_sample", dict(self.tau_pseudo_sample))
        object.__setattr__(self, "collision_mode", CollisionMode(self.collision_mode))
        for cat, k in self.samples_per_category.items():
            if k < 0:
                raise InputError(f"samples_per_category[{cat!r}] must be >= 0, got {k}")
        for cat, tau in self.tau_pseudo_sample.items():
            if not 0.0 <= tau <= 1.0:
                raise InputError(f"tau_pseudo_sample[{cat!r}] must be in [0, 1], got {tau}")
        if not 0.0 <= self.tau_unlabeled_frame <= 1.0:
            raise InputError(f"tau_unlabeled_frame must be in [0, 1], got {self.tau_unlabeled_frame}")
        if self.fade_epoch is not None and self.fade_epoch < 0:
            raise InputError(f"fade_epoch must be >= 0, got {self.fade_epoch}")

    @classmethod
    def outdoor(cls, **overrides) -> "AugmentationConfig":
        base = dict(
            samples_per_category=OUTDOOR_SAMPLES_PER_CATEGORY,
            tau_pseudo_sample=OUTDOOR_TAU_PSEUDO_SAMPLE,
            tau_unlabeled_frame=DEFAULT_TAU_UNLABELED_FRAME,
            gt_on_labeled=True,
            pseudo_on_labeled=True,
            gt_on_unlabeled=True,
            pseudo_on_unlabeled=True,
            collision_mode=CollisionMode.BEV,
            category_shuffle=True,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def indoor(cls, categories: Sequence[str], **overrides) -> "AugmentationConfig":
        """Indoor preset: boxes may legitimately stack, so collisions are 3D."""
        base = dict(
            samples_per_category={c: INDOOR_SAMPLES_PER_CATEGORY_DEFAULT for c in categories},
            tau_pseudo_sample={c: 0.7 for c in categories},
            tau_unlabeled_frame=DEFAULT_TAU_UNLABELED_FRAME,
            gt_on_labeled=True,
            pseudo_on_labeled=True,
            gt_on_unlabeled=True,
            pseudo_on_unlabeled=True,
            collision_mode=CollisionMode.FULL3D,
            category_shuffle=True,
        )
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class PlacedSample:
    """Bookkeeping for one accepted sample."""

    label: Label
    source_frame: str
    num_points: int


@dataclass
class InsertionReport:
    attempted: dict[str, int]
    accepted: dict[str, int]
    placed: list[PlacedSample] = field(default_factory=list)

    def total_attempted(self) -> int:
        return sum(self.attempted.values())

    def total_accepted(self) -> int:
        return sum(self.accepted.values())


@dataclass
class AugmentedFrame:
    frame_id: str
    cloud: PointCloud
    supervising_labels: list[Label]
    collision_anchors: list[Label]
    report: InsertionReport


def fade_active(epoch: int, cfg: AugmentationConfig) -> bool:
    """True once the configured fade epoch is reached; augmentation stops."""
    if epoch < 0:
        raise InputError(f"epoch must be >= 0, got {epoch}")
    return cfg.fade_epoch is not None and epoch >= cfg.fade_epoch


def shuffle_categories(categories: Sequence[str], rng: DetRng, shuffle: bool = True) -> list[str]:
    """Uniform permutation when shuffling is on, else the given order."""
    queue = list(categories)
    if not queue:
        raise InputError("category queue must be non-empty")
    if shuffle:
        rng.shuffle(queue)
    return queue


def _collides_params(p: tuple, q: tuple, full3d: bool) -> bool:
    if not bev_overlap_params(p, q):
        return False
    if not full3d:
        return True
    return min(p[9], q[9]) > max(p[8], q[8])


def _plan_indices(
    occupied: Sequence[OrientedBox3D],
    candidate_boxes: Sequence[OrientedBox3D],
    mode: CollisionMode,
) -> list[int]:
    full3d = mode == CollisionMode.FULL3D
    working = [bev_params(b) for b in occupied]
    accepted: list[int] = []
    for i, box in enumerate(candidate_boxes):
        p = bev_params(box)
        if any(_collides_params(p, other, full3d) for other in working):
            continue
        accepted.append(i)
        working.append(p)
    return accepted


def plan_insertions(
    occupied: Sequence[OrientedBox3D],
    candidates: Sequence[ObjectSample],
    collision_mode: CollisionMode = CollisionMode.BEV,
) -> list[ObjectSample]:
    """Greedy single pass: accept a candidate iff it collides with nothing.

    The occupied set grows with each acceptance, so earlier candidates have
    priority over later ones.
    """
    idx = _plan_indices(occupied, [c.box for c in candidates], CollisionMode(collision_mode))
    return [candidates[i] for i in idx]


_MAX_GRID_CELLS = 256


def _removal_mask(points: np.ndarray, boxes: Sequence[OrientedBox3D]) -> np.ndarray:
    """Mask of frame points lying inside any of the given boxes.

    A coarse occupancy grid over the boxes' BEV bounding rectangles keeps
    the exact containment test off the bulk of the cloud. The prefilter is
    a strict superset, so the result is identical to testing every point
    against every box directly.
    """
    n = points.shape[0]
    removed = np.zeros(n, dtype=bool)
    if n == 0 or not boxes:
        return removed

    params = [bev_params(b) for b in boxes]
    x0 = min(p[0] - p[6] for p in params)
    x1 = max(p[0] + p[6] for p in params)
    y0 = min(p[1] - p[7] for p in params)
    y1 = max(p[1] + p[7] for p in params)

    cell = max((x1 - x0) / _MAX_GRID_CELLS, (y1 - y0) / _MAX_GRID_CELLS, 0.5)
    inv_cell = 1.0 / cell
    nx = int((x1 - x0) * inv_cell) + 1
    ny = int((y1 - y0) * inv_cell) + 1
    occupied = np.zeros(nx * ny, dtype=bool)
    occ2d = occupied.reshape(nx, ny)
    for p in params:
        # dilate by one cell: classification below runs in float32, whose
        # rounding can shift a point by at most one cell
        i0 = max(int((p[0] - p[6] - x0) * inv_cell) - 1, 0)
        i1 = min(int((p[0] + p[6] - x0) * inv_cell) + 1, nx - 1)
        j0 = max(int((p[1] - p[7] - y0) * inv_cell) - 1, 0)
        j1 = min(int((p[1] + p[7] - y0) * inv_cell) + 1, ny - 1)
        occ2d[i0 : i1 + 1, j0 : j1 + 1] = True

    # points outside the union rectangle clip onto border cells; the grid is
    # only a candidate prefilter, and the exact test below rejects extras
    ix = np.multiply(points[:, 0] - x0, inv_cell, dtype=np.float32).astype(np.int32)
    iy = np.multiply(points[:, 1] - y0, inv_cell, dtype=np.float32).astype(np.int32)
    np.clip(ix, 0, nx - 1, out=ix)
    np.clip(iy, 0, ny - 1, out=iy)
    ix *= ny
    ix += iy
    cand = np.flatnonzero(occupied[ix])
    if cand.size == 0:
        return removed

    sub = points[cand]
    for box in boxes:
        inside = points_in_box_mask(sub, box)
        removed[cand[inside]] = True
    return removed


def apply_insertions(
    cloud: PointCloud,
    accepted: Sequence[ObjectSample],
    remove_occluded_points: bool = True,
) -> PointCloud:
    """Paste accepted samples' points; optionally clear the destination boxes.

    Output row count = kept original points + sum of sample point counts.
    """
    if not accepted:
        return cloud
    for s in accepted:
        if s.points.channel_count != cloud.channel_count:
            raise InputError(
                f"sample from {s.source_frame!r} has {s.points.channel_count} channels, "
                f"frame has {cloud.channel_count}"
            )
    base = cloud.points
    if remove_occluded_points:
        removed = _removal_mask(base, [s.box for s in accepted])
        if removed.any():
            base = np.take(base, np.flatnonzero(~removed), axis=0)
    parts = [base] + [s.points.points for s in accepted]
    return PointCloud._wrap(np.concatenate(parts, axis=0))


def _pasted_label(sample: ObjectSample, source: LabelSource) -> Label:
    return Label(sample.category, sample.box, sample.score, source)


def _draw_candidates(
    queue: Sequence[str],
    cfg: AugmentationConfig,
    gt_view: DatabaseView | None,
    pseudo_view: DatabaseView | None,
    rng: DetRng,
    attempted: dict[str, int],
) -> list[tuple[ObjectSample, LabelSource]]:
    candidates: list[tuple[ObjectSample, LabelSource]] = []
    for cat in queue:
        k = cfg.samples_per_category[cat]
        if gt_view is not None:
            for s in draw_samples(gt_view, cat, k, rng):
                candidates.append((s, LabelSource.PASTED_GT))
                attempted[cat] += 1
        if pseudo_view is not None:
            for s in draw_samples(pseudo_view, cat, k, rng):
                candidates.append((s, LabelSource.PASTED_PSEUDO))
                attempted[cat] += 1
    return candidates


def _empty_report(cfg: AugmentationConfig) -> InsertionReport:
    zeros = {c: 0 for c in cfg.samples_per_category}
    return InsertionReport(attempted=dict(zeros), accepted=dict(zeros))


def _augment(
    frame: Frame,
    anchors: Sequence[OrientedBox3D],
    gt_db: SampleDatabase | None,
    pseudo_db: SampleDatabase | None,
    cfg: AugmentationConfig,
    rng: DetRng,
    use_gt: bool,
    use_pseudo: bool,
) -> tuple[PointCloud, InsertionReport]:
    report = _empty_report(cfg)
    if not (use_gt or use_pseudo) or not cfg.samples_per_category:
        return frame.cloud, report
    gt_view = None
    pseudo_view = None
    if use_gt:
        if gt_db is None:
            raise InputError("gt database required by the enabled gt-sampling strategy")
        gt_view = gt_db.view()
    if use_pseudo:
        if pseudo_db is None:
            raise InputError("pseudo database required by the enabled pseudo-sampling strategy")
        pseudo_view = filter_by_score(pseudo_db, cfg.tau_pseudo_sample)
    queue = shuffle_categories(list(cfg.samples_per_category), rng, cfg.category_shuffle)
    candidates = _draw_candidates(queue, cfg, gt_view, pseudo_view, rng, report.attempted)
    accepted_idx = _plan_indices(anchors, [s.box for s, _ in candidates], cfg.collision_mode)
    accepted = [candidates[i] for i in accepted_idx]
    cloud = apply_insertions(frame.cloud, [s for s, _ in accepted], cfg.remove_occluded_points)
    for sample, source in accepted:
        report.accepted[sample.category] += 1
        report.placed.append(
            PlacedSample(
                label=_pasted_label(sample, source),
                source_frame=sample.source_frame,
                num_points=sample.num_points,
            )
        )
    return cloud, report


def augment_labeled_frame(
    frame: Frame,
    gt_db: SampleDatabase | None,
    pseudo_db: SampleDatabase | None,
    cfg: AugmentationConfig,
    epoch: int,
    rng: DetRng,
) -> AugmentedFrame:
    """Paste samples into a labeled frame against its groundtruth boxes.

    Supervising labels are the original groundtruth labels plus one label
    per accepted sample (pasted_gt, or pasted_pseudo with its score).
    """
    for lb in frame.labels:
        if lb.source != LabelSource.GROUNDTRUTH:
            raise InputError(
                f"frame {frame.frame_id!r} carries a {lb.source.value} label; "
                "labeled-frame augmentation expects groundtruth labels only"
            )
    if fade_active(epoch, cfg):
        return AugmentedFrame(
            frame.frame_id, frame.cloud, list(frame.labels), [], _empty_report(cfg)
        )
    anchors = [lb.box for lb in frame.labels]
    cloud, report = _augment(
        frame,
        anchors,
        gt_db,
        pseudo_db,
        cfg,
        rng,
        use_gt=cfg.gt_on_labeled,
        use_pseudo=cfg.pseudo_on_labeled,
    )
    supervising = list(frame.labels) + [p.label for p in report.placed]
    return AugmentedFrame(frame.frame_id, cloud, supervising, [], report)


def augment_unlabeled_frame(
    frame: Frame,
    pseudo_labels: Sequence[Label],
    gt_db: SampleDatabase | None,
    pseudo_db: SampleDatabase | None,
    cfg: AugmentationConfig,
    epoch: int,
    rng: DetRng,
) -> AugmentedFrame:
    """Paste samples into an unlabeled frame against thresholded pseudo labels.

    Pseudo labels scoring above tau_unlabeled_frame become collision
    anchors. Accepted samples' points are pasted, but their labels appear
    only in the insertion report: supervising_labels is always empty.
    """
    if any(lb.source == LabelSource.GROUNDTRUTH for lb in frame.labels):
        raise InputError(f"frame {frame.frame_id!r} is labeled; expected an unlabeled frame")
    for lb in pseudo_labels:
        if lb.score is None:
            raise InputError(f"frame {frame.frame_id!r}: pseudo label without a score")
    anchors = [lb for lb in pseudo_labels if lb.score > cfg.tau_unlabeled_frame]
    if fade_active(epoch, cfg):
        return AugmentedFrame(frame.frame_id, frame.cloud, [], anchors, _empty_report(cfg))
    cloud, report = _augment(
        frame,
        [lb.box for lb in anchors],
        gt_db,
        pseudo_db,
        cfg,
        rng,
        use_gt=cfg.gt_on_unlabeled,
        use_pseudo=cfg.pseudo_on_unlabeled,
    )
    return AugmentedFrame(frame.frame_id, cloud, [], anchors, report)

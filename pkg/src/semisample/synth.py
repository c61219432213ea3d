"""Synthetic scene generation for tests, benchmarks, and harness runs.

Scenes are a flat ground sheet plus a handful of non-overlapping boxes
filled with points. Labeled frames get labels and instance masks;
unlabeled and eval frames get a hidden ``.truth`` file instead, so loaders
see them as unlabeled.

Box placement uses the package's deterministic streams; bulk point arrays
come from a numpy generator seeded off the same stream, which keeps frame
generation fast and reproducible.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import OrientedBox3D, PointCloud, bev_overlap
from .pointcloud_io import (
    Frame,
    Label,
    LabelSource,
    RunManifest,
    label_mask_keys,
    save_frame,
    write_labels,
)
from .rng import DetRng
from .simulation import TRUTH_SUFFIX

CATEGORY_SIZES = {
    "car": (4.2, 1.8, 1.6),
    "pedestrian": (0.7, 0.7, 1.75),
    "cyclist": (1.8, 0.6, 1.7),
    "chair": (0.6, 0.6, 0.9),
    "table": (1.4, 0.8, 0.75),
    "sofa": (1.9, 0.9, 0.8),
}
DEFAULT_SIZE = (1.2, 1.2, 1.2)


def category_size(category: str) -> tuple[float, float, float]:
    return CATEGORY_SIZES.get(category, DEFAULT_SIZE)


def random_box(category: str, rng: DetRng, extent: float = 25.0) -> OrientedBox3D:
    base = category_size(category)
    size = tuple(d * (1.0 + rng.uniform(-0.15, 0.15)) for d in base)
    center = (
        rng.uniform(-extent, extent),
        rng.uniform(-extent, extent),
        size[2] / 2.0 + rng.uniform(-0.05, 0.2),
    )
    return OrientedBox3D(center, size, rng.uniform(-math.pi, math.pi))


def _points_in_box(box: OrientedBox3D, count: int, np_rng, channel_count: int) -> np.ndarray:
    local = (np_rng.random((count, 3)) - 0.5) * np.asarray(box.size)
    c = math.cos(box.yaw)
    s = math.sin(box.yaw)
    world = np.empty((count, channel_count))
    world[:, 0] = box.center[0] + local[:, 0] * c - local[:, 1] * s
    world[:, 1] = box.center[1] + local[:, 0] * s + local[:, 1] * c
    world[:, 2] = box.center[2] + local[:, 2]
    if channel_count > 3:
        world[:, 3:] = np_rng.random((count, channel_count - 3))
    return world


def make_scene(
    frame_id: str,
    categories: Sequence[str],
    rng: DetRng,
    *,
    objects: tuple[int, int] = (3, 8),
    extent: float = 25.0,
    ground_points: int = 1500,
    object_points: tuple[int, int] = (60, 240),
    channel_count: int = 4,
) -> Frame:
    """One frame with boxes placed collision-free and masks for every object."""
    np_rng = np.random.default_rng(rng.next_u64())
    n_objects = objects[0] + rng.randbelow(objects[1] - objects[0] + 1)
    boxes: list[OrientedBox3D] = []
    labels: list[Label] = []
    for _ in range(n_objects):
        category = categories[rng.randbelow(len(categories))]
        for _attempt in range(40):
            box = random_box(category, rng, extent)
            if all(not bev_overlap(box, other) for other in boxes):
                boxes.append(box)
                labels.append(Label(category, box, None, LabelSource.GROUNDTRUTH))
                break

    ground = np.empty((ground_points, channel_count))
    margin = extent + 5.0
    ground[:, 0] = np_rng.uniform(-margin, margin, ground_points)
    ground[:, 1] = np_rng.uniform(-margin, margin, ground_points)
    ground[:, 2] = np_rng.uniform(-0.05, 0.05, ground_points)
    if channel_count > 3:
        ground[:, 3:] = np_rng.random((ground_points, channel_count - 3))

    chunks = [ground]
    masks: dict[str, list[int]] = {}
    offset = ground_points
    keys = label_mask_keys(labels)
    for label, key in zip(labels, keys):
        count = object_points[0] + int(np_rng.integers(0, object_points[1] - object_points[0] + 1))
        chunks.append(_points_in_box(label.box, count, np_rng, channel_count))
        masks[key] = list(range(offset, offset + count))
        offset += count

    pts = np.concatenate(chunks, axis=0)
    # storage is float32; round now so in-memory frames match their files
    pts = pts.astype(np.float32).astype(np.float64)
    return Frame(frame_id, PointCloud(pts), labels, masks)


def generate_dataset(
    root,
    *,
    categories: Sequence[str] = ("car", "pedestrian", "cyclist"),
    n_labeled: int = 6,
    n_unlabeled: int = 6,
    n_eval: int = 0,
    seed: int = 0,
    channel_count: int = 4,
    **scene_kwargs,
) -> RunManifest:
    """Write a full synthetic dataset (frames + manifest) under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    labeled_ids = [f"lab{i:04d}" for i in range(n_labeled)]
    unlabeled_ids = [f"unl{i:04d}" for i in range(n_unlabeled)]
    eval_ids = [f"ev{i:04d}" for i in range(n_eval)]

    for fid in labeled_ids:
        frame = make_scene(fid, categories, DetRng.from_key(seed, "gen", fid),
                           channel_count=channel_count, **scene_kwargs)
        save_frame(root, frame)
    for fid in unlabeled_ids + eval_ids:
        frame = make_scene(fid, categories, DetRng.from_key(seed, "gen", fid),
                           channel_count=channel_count, **scene_kwargs)
        truth_text = write_labels(frame.labels)
        (root / f"{fid}{TRUTH_SUFFIX}").write_text(truth_text)
        save_frame(root, Frame(fid, frame.cloud, [], None))

    manifest = RunManifest(
        root=root,
        channel_count=channel_count,
        categories=tuple(categories),
        labeled_frames=tuple(labeled_ids),
        unlabeled_frames=tuple(unlabeled_ids),
        eval_frames=tuple(eval_ids),
    )
    manifest.save()
    return RunManifest.load(root)

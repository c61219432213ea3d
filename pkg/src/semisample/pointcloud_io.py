"""Readers and writers for point clouds, labels, instance masks, and frames.

On-disk formats, all little-endian / plain text:
  - ``<frame_id>.bin``     packed float32, row-major, channel count declared
                           out of band (dataset manifest; default 4).
  - ``<frame_id>.labels``  one object per line:
                           ``category cx cy cz dx dy dz yaw score source``
                           where score is a float in [0, 1] or ``-`` and
                           source is one of groundtruth / pseudo /
                           pasted_gt / pasted_pseudo.
  - ``<frame_id>.masks``   one instance per line: ``category#k i j ...``
                           listing point indices of the k-th instance of
                           that category, in label order.
  - ``manifest.yaml``      dataset root file: channel_count, categories,
                           labeled/unlabeled (and optional eval) frame ids.

Labels live in the world/sensor frame directly; there is no camera
coordinate system or calibration anywhere in this package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import yaml

from .errors import FormatError, InputError, NotFoundError
from .geometry import OrientedBox3D, PointCloud

MANIFEST_NAME = "manifest.yaml"


class LabelSource(str, Enum):
    GROUNDTRUTH = "groundtruth"
    PSEUDO = "pseudo"
    PASTED_GT = "pasted_gt"
    PASTED_PSEUDO = "pasted_pseudo"


@dataclass(frozen=True)
class Label:
    """A category plus box, optional confidence score, and provenance."""

    category: str
    box: OrientedBox3D
    score: float | None
    source: LabelSource

    def __post_init__(self):
        if not self.category or any(ch.isspace() for ch in self.category):
            raise InputError(f"category must be non-empty without whitespace: {self.category!r}")
        if self.score is not None:
            s = float(self.score)
            if not 0.0 <= s <= 1.0:
                raise InputError(f"score must be in [0, 1], got {s}")
            object.__setattr__(self, "score", s)
        if self.source == LabelSource.GROUNDTRUTH and self.score not in (None, 1.0):
            raise InputError("groundtruth labels carry no score (or exactly 1.0)")
        if self.source in (LabelSource.PSEUDO, LabelSource.PASTED_PSEUDO) and self.score is None:
            raise InputError(f"{self.source.value} labels must carry a score")


@dataclass
class Frame:
    """One point-cloud frame with its labels and optional instance masks."""

    frame_id: str
    cloud: PointCloud
    labels: list[Label] = field(default_factory=list)
    instance_masks: dict[str, list[int]] | None = None


def _fmt(x: float) -> str:
    return repr(float(x))


def read_points_bin(data: bytes, channel_count: int = 4) -> PointCloud:
    """Decode packed little-endian float32 rows into a PointCloud."""
    if channel_count < 3:
        raise InputError(f"channel_count must be >= 3, got {channel_count}")
    row_bytes = 4 * channel_count
    if len(data) % row_bytes != 0:
        raise FormatError(
            f"byte length {len(data)} is not a multiple of {row_bytes} "
            f"(channel_count={channel_count})"
        )
    if not data:
        return PointCloud.empty(channel_count)
    arr = np.frombuffer(data, dtype="<f4").reshape(-1, channel_count)
    if not np.isfinite(arr).all():
        raise FormatError("points file contains non-finite values")
    return PointCloud(arr.astype(np.float64))


def write_points_bin(cloud: PointCloud) -> bytes:
    """Encode a PointCloud as packed little-endian float32 rows."""
    return np.ascontiguousarray(cloud.points.astype("<f4")).tobytes()


def write_labels(labels) -> str:
    lines = []
    for lb in labels:
        row = lb.box.as_row()
        score = "-" if lb.score is None else _fmt(lb.score)
        lines.append(
            f"{lb.category} " + " ".join(_fmt(v) for v in row) + f" {score} {lb.source.value}"
        )
    return "".join(line + "\n" for line in lines)


def read_labels(text: str) -> list[Label]:
    labels = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 10:
            raise FormatError(f"line {lineno}: expected 10 fields, got {len(fields)}")
        category = fields[0]
        try:
            nums = [float(v) for v in fields[1:8]]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad number: {exc}") from None
        score = None
        if fields[8] != "-":
            try:
                score = float(fields[8])
            except ValueError:
                raise FormatError(f"line {lineno}: bad score {fields[8]!r}") from None
        try:
            source = LabelSource(fields[9])
        except ValueError:
            raise FormatError(f"line {lineno}: unknown source {fields[9]!r}") from None
        try:
            box = OrientedBox3D.from_row(nums)
            labels.append(Label(category, box, score, source))
        except InputError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return labels


def write_masks(masks: dict[str, list[int]]) -> str:
    lines = []
    for key, idx in masks.items():
        lines.append(key + " " + " ".join(str(int(i)) for i in idx))
    return "".join(line + "\n" for line in lines)


def read_masks(text: str) -> dict[str, list[int]]:
    masks: dict[str, list[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0]
        if key in masks:
            raise FormatError(f"line {lineno}: duplicate mask key {key!r}")
        try:
            idx = [int(v) for v in fields[1:]]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad index: {exc}") from None
        if any(i < 0 for i in idx):
            raise FormatError(f"line {lineno}: negative mask index")
        if len(set(idx)) != len(idx):
            raise FormatError(f"line {lineno}: duplicate indices in mask {key!r}")
        masks[key] = idx
    return masks


def mask_key(category: str, ordinal: int) -> str:
    return f"{category}#{ordinal}"


def label_mask_keys(labels) -> list[str]:
    """Mask key for each label: category plus per-category occurrence count."""
    seen: dict[str, int] = {}
    keys = []
    for lb in labels:
        k = seen.get(lb.category, 0)
        keys.append(mask_key(lb.category, k))
        seen[lb.category] = k + 1
    return keys


def load_frame(root, frame_id: str, channel_count: int = 4) -> Frame:
    """Assemble a Frame from ``<root>/<frame_id>.{bin,labels,masks}``.

    Absent labels yield an unlabeled frame; absent masks yield None.
    """
    root = Path(root)
    points_path = root / f"{frame_id}.bin"
    if not points_path.is_file():
        raise NotFoundError(f"points file not found: {points_path}")
    try:
        cloud = read_points_bin(points_path.read_bytes(), channel_count)
    except FormatError as exc:
        raise FormatError(f"{points_path}: {exc}") from None

    labels: list[Label] = []
    labels_path = root / f"{frame_id}.labels"
    if labels_path.is_file():
        try:
            labels = read_labels(labels_path.read_text())
        except FormatError as exc:
            raise FormatError(f"{labels_path}: {exc}") from None

    masks = None
    masks_path = root / f"{frame_id}.masks"
    if masks_path.is_file():
        try:
            masks = read_masks(masks_path.read_text())
        except FormatError as exc:
            raise FormatError(f"{masks_path}: {exc}") from None
        n = len(cloud)
        for key, idx in masks.items():
            for i in idx:
                if i >= n:
                    raise FormatError(
                        f"{masks_path}: mask {key!r} references index {i} "
                        f"but cloud has {n} points"
                    )
    return Frame(frame_id, cloud, labels, masks)


def save_frame(root, frame: Frame) -> None:
    """Write a frame's points (plus labels/masks when present) under root."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / f"{frame.frame_id}.bin").write_bytes(write_points_bin(frame.cloud))
    if frame.labels:
        (root / f"{frame.frame_id}.labels").write_text(write_labels(frame.labels))
    if frame.instance_masks is not None:
        (root / f"{frame.frame_id}.masks").write_text(write_masks(frame.instance_masks))


@dataclass(frozen=True)
class RunManifest:
    """Dataset manifest: channel count, categories, and the frame-id split."""

    root: Path
    channel_count: int
    categories: tuple[str, ...]
    labeled_frames: tuple[str, ...]
    unlabeled_frames: tuple[str, ...]
    eval_frames: tuple[str, ...] = ()
    content_hash: str = ""

    def __post_init__(self):
        if self.channel_count < 3:
            raise InputError(f"channel_count must be >= 3, got {self.channel_count}")
        if not self.categories:
            raise InputError("manifest must declare at least one category")
        for name in self.categories:
            if not name or any(ch.isspace() for ch in name):
                raise InputError(f"bad category name: {name!r}")
        all_ids = list(self.labeled_frames) + list(self.unlabeled_frames) + list(self.eval_frames)
        for fid in all_ids:
            if not fid or any(ch.isspace() for ch in fid):
                raise InputError(f"bad frame id: {fid!r}")
        if len(set(all_ids)) != len(all_ids):
            raise InputError("labeled/unlabeled/eval frame-id lists must be disjoint")

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.is_file():
            raise NotFoundError(f"manifest not found: {path}")
        raw_bytes = path.read_bytes()
        try:
            raw = yaml.safe_load(raw_bytes)
        except yaml.YAMLError as exc:
            raise FormatError(f"{path}: invalid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise FormatError(f"{path}: manifest must be a mapping")
        known = {"channel_count", "categories", "labeled_frames", "unlabeled_frames", "eval_frames"}
        unknown = set(raw) - known
        if unknown:
            raise FormatError(f"{path}: unknown manifest keys: {sorted(unknown)}")
        try:
            return cls(
                root=path.parent,
                channel_count=int(raw.get("channel_count", 4)),
                categories=tuple(str(c) for c in raw.get("categories", [])),
                labeled_frames=tuple(str(f) for f in raw.get("labeled_frames", [])),
                unlabeled_frames=tuple(str(f) for f in raw.get("unlabeled_frames", [])),
                eval_frames=tuple(str(f) for f in raw.get("eval_frames", [])),
                content_hash=hashlib.sha256(raw_bytes).hexdigest(),
            )
        except InputError as exc:
            raise FormatError(f"{path}: {exc}") from None

    def save(self) -> Path:
        path = Path(self.root) / MANIFEST_NAME
        doc = {
            "channel_count": self.channel_count,
            "categories": list(self.categories),
            "labeled_frames": list(self.labeled_frames),
            "unlabeled_frames": list(self.unlabeled_frames),
        }
        if self.eval_frames:
            doc["eval_frames"] = list(self.eval_frames)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
        return path

    def load_frame(self, frame_id: str) -> Frame:
        return load_frame(self.root, frame_id, self.channel_count)

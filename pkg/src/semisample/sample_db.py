"""Object-sample databases: build, persist, filter, and draw.

A database is a per-category index over cropped object samples plus a
packed float32 point store. Ground-truth and pseudo databases share the
layout; the only differences are the sample scores (1.0 for gt) and the
thresholds applied at build time.

Directory layout (see ``save_db``):
  - ``index.txt``   one record per sample:
                    ``category cx cy cz dx dy dz yaw score source_frame
                    num_points offset`` with offset in bytes into the store;
  - ``points.bin``  packed little-endian float32, contiguous sample slices;
  - ``meta``        flat ``key: value`` lines (kind, channel_count,
                    thresholds, source manifest hash, format version).

Databases are immutable after build/load; ``draw_samples`` takes a
caller-owned rng state, so concurrent readers never contend.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError, InputError
from .geometry import OrientedBox3D, PointCloud, crop_points_by_mask, crop_points_in_box
from .pointcloud_io import Frame, Label, LabelSource, label_mask_keys
from .rng import DetRng

FORMAT_VERSION = 1
DEFAULT_MIN_POINTS = 5

INDEX_NAME = "index.txt"
POINTS_NAME = "points.bin"
META_NAME = "meta"

_POINT_COUNT_EDGES = (5, 10, 20, 50, 100, 200, 500, 1000)


@dataclass(frozen=True)
class ObjectSample:
    """A cropped point set with its box, category, score, and origin."""

    category: str
    points: PointCloud
    box: OrientedBox3D
    score: float
    source_frame: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"sample score must be in [0, 1], got {self.score}")

    @property
    def num_points(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SampleRecord:
    category: str
    box: OrientedBox3D
    score: float
    source_frame: str
    num_points: int
    offset: int


class SampleDatabase:
    """Immutable per-category collection of object samples."""

    def __init__(
        self,
        kind: str,
        channel_count: int,
        records: Sequence[SampleRecord],
        points_getter: Callable[[SampleRecord], np.ndarray],
        *,
        min_points: int = DEFAULT_MIN_POINTS,
        min_score: float = 0.0,
        source_manifest_hash: str = "",
        categories: Sequence[str] = (),
    ):
        if kind not in ("gt", "pseudo"):
            raise InputError(f"database kind must be 'gt' or 'pseudo', got {kind!r}")
        if kind == "gt" and any(r.score != 1.0 for r in records):
            raise InputError("gt databases must have all sample scores equal to 1.0")
        self.kind = kind
        self.channel_count = channel_count
        self.records = tuple(records)
        self.min_points = min_points
        self.min_score = min_score
        self.source_manifest_hash = source_manifest_hash
        self._get_points = points_getter
        self.by_category: dict[str, list[int]] = {c: [] for c in categories}
        for i, rec in enumerate(self.records):
            self.by_category.setdefault(rec.category, []).append(i)

    def __len__(self) -> int:
        return len(self.records)

    def categories(self) -> list[str]:
        return list(self.by_category)

    def sample(self, index: int) -> ObjectSample:
        rec = self.records[index]
        pts = self._get_points(rec)
        return ObjectSample(rec.category, PointCloud(pts), rec.box, rec.score, rec.source_frame)

    def view(self) -> "DatabaseView":
        return DatabaseView(self, {c: tuple(idx) for c, idx in self.by_category.items()})


@dataclass(frozen=True)
class DatabaseView:
    """A filtered, read-only selection over a database's samples."""

    db: SampleDatabase
    indices_by_category: dict[str, tuple[int, ...]]

    def count(self, category: str) -> int:
        if category not in self.indices_by_category:
            raise InputError(f"unknown category {category!r}")
        return len(self.indices_by_category[category])

    def total(self) -> int:
        return sum(len(v) for v in self.indices_by_category.values())


def _crop_for_label(frame: Frame, label: Label, use_masks: bool, key: str) -> PointCloud:
    if use_masks:
        if frame.instance_masks is None or key not in frame.instance_masks:
            raise InputError(
                f"frame {frame.frame_id!r}: missing instance mask {key!r} "
                f"for a {label.category!r} label"
            )
        return crop_points_by_mask(frame.cloud, frame.instance_masks[key])
    cropped, _ = crop_points_in_box(frame.cloud, label.box)
    return cropped


def _build(
    kind: str,
    frames_and_labels,
    channel_count: int,
    use_masks: bool,
    min_points: int,
    min_score: float,
    categories: Sequence[str],
    source_manifest_hash: str,
) -> SampleDatabase:
    chunks: list[np.ndarray] = []
    records: list[SampleRecord] = []
    offset = 0
    row_bytes = 4 * channel_count
    for frame, labels in frames_and_labels:
        if frame.cloud.channel_count != channel_count:
            raise InputError(
                f"frame {frame.frame_id!r} has {frame.cloud.channel_count} channels, "
                f"expected {channel_count}"
            )
        keys = label_mask_keys(labels)
        for label, key in zip(labels, keys):
            score = 1.0 if kind == "gt" else label.score
            if kind == "pseudo" and score < min_score:
                continue
            cropped = _crop_for_label(frame, label, use_masks, key)
            if len(cropped) < min_points:
                continue
            records.append(
                SampleRecord(
                    category=label.category,
                    box=label.box,
                    score=float(score),
                    source_frame=frame.frame_id,
                    num_points=len(cropped),
                    offset=offset,
                )
            )
            chunks.append(cropped.points)
            offset += len(cropped) * row_bytes

    by_id = {id(rec): chunk for rec, chunk in zip(records, chunks)}

    def getter(rec: SampleRecord) -> np.ndarray:
        return by_id[id(rec)]

    return SampleDatabase(
        kind,
        channel_count,
        records,
        getter,
        min_points=min_points,
        min_score=min_score,
        source_manifest_hash=source_manifest_hash,
        categories=categories,
    )


def build_gt_database(
    frames: Iterable[Frame],
    *,
    use_masks: bool = False,
    min_points: int = DEFAULT_MIN_POINTS,
    categories: Sequence[str] = (),
    source_manifest_hash: str = "",
) -> SampleDatabase:
    """Crop one sample per groundtruth label with at least min_points points.

    Cropping uses instance masks when ``use_masks`` (every label must then
    have one), else the label's box. Sample scores are set to 1.0.
    """
    pairs = []
    channel_count = None
    for frame in frames:
        for lb in frame.labels:
            if lb.source != LabelSource.GROUNDTRUTH:
                raise InputError(
                    f"frame {frame.frame_id!r} carries a non-groundtruth label "
                    f"({lb.source.value}); gt databases build from labeled frames only"
                )
        channel_count = frame.cloud.channel_count if channel_count is None else channel_count
        pairs.append((frame, frame.labels))
    if channel_count is None:
        raise InputError("no frames supplied")
    return _build(
        "gt", pairs, channel_count, use_masks, min_points, 0.0, categories, source_manifest_hash
    )


def build_pseudo_database(
    frames: Iterable[Frame],
    pseudo_labels: Mapping[str, Sequence[Label]],
    *,
    min_score: float = 0.0,
    min_points: int = DEFAULT_MIN_POINTS,
    categories: Sequence[str] = (),
    source_manifest_hash: str = "",
) -> SampleDatabase:
    """Crop pseudo samples by their predicted boxes from unlabeled frames.

    Only pseudo labels with score >= min_score (and enough cropped points)
    become samples; scores are preserved.
    """
    pairs = []
    channel_count = None
    for frame in frames:
        if any(lb.source == LabelSource.GROUNDTRUTH for lb in frame.labels):
            raise InputError(f"frame {frame.frame_id!r} is labeled; expected unlabeled frames")
        if frame.frame_id not in pseudo_labels:
            raise InputError(f"no pseudo labels supplied for frame {frame.frame_id!r}")
        labels = list(pseudo_labels[frame.frame_id])
        for lb in labels:
            if lb.score is None:
                raise FormatError(
                    f"frame {frame.frame_id!r}: pseudo label without a score"
                )
        channel_count = frame.cloud.channel_count if channel_count is None else channel_count
        pairs.append((frame, labels))
    if channel_count is None:
        raise InputError("no frames supplied")
    return _build(
        "pseudo",
        pairs,
        channel_count,
        False,
        min_points,
        min_score,
        categories,
        source_manifest_hash,
    )


def filter_by_score(db, thresholds: Mapping[str, float]) -> DatabaseView:
    """View of samples whose score strictly exceeds their category threshold.

    Every category that has samples needs an explicit threshold; missing
    entries are an error rather than a silent pass-through.
    """
    view = db.view() if isinstance(db, SampleDatabase) else db
    base = view.db
    out: dict[str, tuple[int, ...]] = {}
    for category, indices in view.indices_by_category.items():
        if indices and category not in thresholds:
            raise InputError(f"no score threshold supplied for category {category!r}")
        tau = float(thresholds.get(category, 0.0))
        if not 0.0 <= tau <= 1.0:
            raise InputError(f"threshold for {category!r} must be in [0, 1], got {tau}")
        out[category] = tuple(i for i in indices if base.records[i].score > tau)
    return DatabaseView(base, out)


def draw_samples(view: DatabaseView, category: str, k: int, rng: DetRng) -> list[ObjectSample]:
    """Up to k distinct samples of a category, uniform without replacement."""
    if k < 0:
        raise InputError(f"draw count must be >= 0, got {k}")
    if category not in view.indices_by_category:
        raise InputError(f"unknown category {category!r}")
    pool = view.indices_by_category[category]
    if k == 0 or not pool:
        return []
    picks = rng.sample_indices(len(pool), k)
    return [view.db.sample(pool[i]) for i in picks]


def save_db(db: SampleDatabase, path) -> Path:
    """Write index.txt + points.bin + meta; offsets are recomputed contiguous."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    row_bytes = 4 * db.channel_count
    index_lines = []
    offset = 0
    with open(path / POINTS_NAME, "wb") as fh:
        for i, rec in enumerate(db.records):
            pts = db._get_points(rec)
            fh.write(np.ascontiguousarray(pts.astype("<f4")).tobytes())
            row = rec.box.as_row()
            index_lines.append(
                f"{rec.category} "
                + " ".join(repr(float(v)) for v in row)
                + f" {repr(float(rec.score))} {rec.source_frame} {rec.num_points} {offset}"
            )
            offset += rec.num_points * row_bytes
    (path / INDEX_NAME).write_text("".join(line + "\n" for line in index_lines))
    meta = (
        f"format_version: {FORMAT_VERSION}\n"
        f"kind: {db.kind}\n"
        f"channel_count: {db.channel_count}\n"
        f"num_samples: {len(db)}\n"
        f"min_points: {db.min_points}\n"
        f"min_score: {repr(float(db.min_score))}\n"
        f"source_manifest_hash: {db.source_manifest_hash}\n"
        f"categories: {','.join(db.by_category)}\n"
    )
    (path / META_NAME).write_text(meta)
    return path


def _parse_meta(text: str, path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if ":" not in line:
            raise FormatError(f"{path}: bad meta line {line!r}")
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    return meta


def load_db(path) -> SampleDatabase:
    """Load a database directory; point slices are read lazily on draw."""
    path = Path(path)
    meta_path = path / META_NAME
    index_path = path / INDEX_NAME
    points_path = path / POINTS_NAME
    for p in (meta_path, index_path, points_path):
        if not p.is_file():
            raise FormatError(f"database file missing: {p}")
    meta = _parse_meta(meta_path.read_text(), meta_path)
    try:
        version = int(meta["format_version"])
        kind = meta["kind"]
        channel_count = int(meta["channel_count"])
        num_samples = int(meta["num_samples"])
        min_points = int(meta.get("min_points", DEFAULT_MIN_POINTS))
        min_score = float(meta.get("min_score", 0.0))
        manifest_hash = meta.get("source_manifest_hash", "")
        categories = [c for c in meta.get("categories", "").split(",") if c]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{meta_path}: bad or missing meta field: {exc}") from None
    if version != FORMAT_VERSION:
        raise FormatError(f"{meta_path}: unsupported format_version {version}")

    row_bytes = 4 * channel_count
    records: list[SampleRecord] = []
    expected_offset = 0
    for lineno, raw in enumerate(index_path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 12:
            raise FormatError(f"{index_path}: line {lineno}: expected 12 fields, got {len(fields)}")
        try:
            box = OrientedBox3D.from_row([float(v) for v in fields[1:8]])
            score = float(fields[8])
            num_points = int(fields[10])
            offset = int(fields[11])
        except (ValueError, InputError) as exc:
            raise FormatError(f"{index_path}: line {lineno}: {exc}") from None
        if offset != expected_offset:
            raise FormatError(
                f"{index_path}: line {lineno}: offset {offset} disagrees with "
                f"point store position {expected_offset}"
            )
        records.append(SampleRecord(fields[0], box, score, fields[9], num_points, offset))
        expected_offset += num_points * row_bytes
    if len(records) != num_samples:
        raise FormatError(
            f"{index_path}: index has {len(records)} records but meta declares {num_samples}"
        )
    size = os.path.getsize(points_path)
    if size != expected_offset:
        raise FormatError(
            f"{points_path}: point store has {size} bytes, index requires {expected_offset}"
        )

    if size:
        mm = np.memmap(points_path, dtype="<f4", mode="r")
    else:
        mm = np.zeros(0, dtype="<f4")

    def getter(rec: SampleRecord) -> np.ndarray:
        start = rec.offset // 4
        stop = start + rec.num_points * channel_count
        return np.array(mm[start:stop], dtype=np.float64).reshape(rec.num_points, channel_count)

    return SampleDatabase(
        kind,
        channel_count,
        records,
        getter,
        min_points=min_points,
        min_score=min_score,
        source_manifest_hash=manifest_hash,
        categories=categories,
    )


def db_stats(db: SampleDatabase) -> dict:
    """Per-category counts plus point-count and score histograms."""
    per_category = {c: len(idx) for c, idx in sorted(db.by_category.items())}
    point_hist: dict[str, int] = {}
    edges = (0,) + _POINT_COUNT_EDGES
    bin_names = [f"[{lo},{hi})" for lo, hi in zip(edges, edges[1:])] + [f"[{edges[-1]},inf)"]
    for name in bin_names:
        point_hist[name] = 0
    score_hist = {f"[{i / 10:.1f},{(i + 1) / 10:.1f})": 0 for i in range(9)}
    score_hist["[0.9,1.0]"] = 0
    for rec in db.records:
        b = np.searchsorted(_POINT_COUNT_EDGES, rec.num_points, side="right")
        point_hist[bin_names[b]] += 1
        s = min(int(rec.score * 10), 9)
        score_hist[list(score_hist)[s]] += 1
    return {
        "kind": db.kind,
        "channel_count": db.channel_count,
        "total": len(db),
        "per_category": per_category,
        "point_count_histogram": point_hist,
        "score_histogram": score_hist,
    }

"""Oriented-box math on upright 3D boxes.

Boxes rotate about the world up-axis only, so BEV (the xy projection) does
all the rotational work and the z axis reduces to interval arithmetic.
All operations here are pure functions of their arguments.

Conventions, fixed package-wide:
  - point-in-box is boundary inclusive;
  - overlap predicates require strictly positive intersection, so boxes
    that share only an edge or corner do not collide;
  - intersection areas below ``AREA_EPS`` count as zero, unions below
    ``UNION_EPS`` make the IoU zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

TWO_PI = 2.0 * math.pi

AREA_EPS = 1e-9
UNION_EPS = 1e-12


def normalize_yaw(yaw: float) -> float:
    """Map an angle to the canonical range [-pi, pi)."""
    r = yaw - TWO_PI * math.floor((yaw + math.pi) / TWO_PI)
    if r >= math.pi:
        r -= TWO_PI
    if r < -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class OrientedBox3D:
    """Upright 3D box: center (x, y, z), size (dx, dy, dz), yaw about +z.

    Sizes are strictly positive; yaw is normalized to [-pi, pi) on
    construction.
    """

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        center = tuple(float(v) for v in self.center)
        size = tuple(float(v) for v in self.size)
        if len(center) != 3 or len(size) != 3:
            raise InputError("box center and size must have 3 components")
        yaw = float(self.yaw)
        if not all(math.isfinite(v) for v in center + size) or not math.isfinite(yaw):
            raise InputError("box parameters must be finite")
        if min(size) <= 0.0:
            raise InputError(f"box size must be strictly positive, got {size}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "yaw", normalize_yaw(yaw))

    @classmethod
    def from_row(cls, row) -> "OrientedBox3D":
        """Build from a flat (cx, cy, cz, dx, dy, dz, yaw) sequence."""
        r = [float(v) for v in row]
        if len(r) != 7:
            raise InputError(f"box row must have 7 values, got {len(r)}")
        return cls((r[0], r[1], r[2]), (r[3], r[4], r[5]), r[6])

    def as_row(self) -> tuple[float, ...]:
        return (*self.center, *self.size, self.yaw)

    def bev_corners(self) -> np.ndarray:
        """BEV footprint corners, counter-clockwise, shape (4, 2)."""
        c = math.cos(self.yaw)
        s = math.sin(self.yaw)
        hx = self.size[0] / 2.0
        hy = self.size[1] / 2.0
        cx, cy = self.center[0], self.center[1]
        local = ((hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy))
        return np.array(
            [(cx + lx * c - ly * s, cy + lx * s + ly * c) for lx, ly in local],
            dtype=np.float64,
        )

    def z_interval(self) -> tuple[float, float]:
        hz = self.size[2] / 2.0
        return (self.center[2] - hz, self.center[2] + hz)

    @property
    def bev_area(self) -> float:
        return self.size[0] * self.size[1]

    @property
    def volume(self) -> float:
        return self.size[0] * self.size[1] * self.size[2]


class PointCloud:
    """N x channel_count array of float64, first three channels x, y, z.

    Values must be finite. The array is owned by the cloud; treat it as
    read-only.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2:
            raise InputError(f"points must be a 2-D array, got ndim={arr.ndim}")
        if arr.shape[1] < 3:
            raise InputError(f"points need at least 3 channels, got {arr.shape[1]}")
        if arr.size and not np.isfinite(arr).all():
            raise InputError("points contain non-finite values")
        self.points = np.ascontiguousarray(arr)

    @classmethod
    def empty(cls, channel_count: int = 4) -> "PointCloud":
        if channel_count < 3:
            raise InputError(f"channel_count must be >= 3, got {channel_count}")
        return cls(np.zeros((0, channel_count), dtype=np.float64))

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "PointCloud":
        """Adopt an array known to satisfy the invariants (row selections and
        concatenations of already-validated clouds); skips re-validation."""
        obj = cls.__new__(cls)
        obj.points = arr
        return obj

    @property
    def channel_count(self) -> int:
        return self.points.shape[1]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    def __repr__(self) -> str:
        return f"PointCloud({len(self)} points, {self.channel_count} channels)"


def point_in_box(p, box: OrientedBox3D) -> bool:
    """Boundary-inclusive containment of a single point."""
    px, py, pz = float(p[0]), float(p[1]), float(p[2])
    c = math.cos(box.yaw)
    s = math.sin(box.yaw)
    dx = px - box.center[0]
    dy = py - box.center[1]
    dz = pz - box.center[2]
    lx = dx * c + dy * s
    ly = dy * c - dx * s
    return (
        abs(lx) <= box.size[0] / 2.0
        and abs(ly) <= box.size[1] / 2.0
        and abs(dz) <= box.size[2] / 2.0
    )


def points_in_box_mask(points: np.ndarray, box: OrientedBox3D) -> np.ndarray:
    """Vectorized point_in_box over the rows of an (N, >=3) array."""
    c = math.cos(box.yaw)
    s = math.sin(box.yaw)
    dx = points[:, 0] - box.center[0]
    dy = points[:, 1] - box.center[1]
    dz = points[:, 2] - box.center[2]
    lx = dx * c + dy * s
    ly = dy * c - dx * s
    return (
        (np.abs(lx) <= box.size[0] / 2.0)
        & (np.abs(ly) <= box.size[1] / 2.0)
        & (np.abs(dz) <= box.size[2] / 2.0)
    )


def crop_points_in_box(cloud: PointCloud, box: OrientedBox3D):
    """Rows of the cloud inside the box, in original order, plus their indices."""
    if len(cloud) == 0:
        return PointCloud._wrap(cloud.points), np.zeros(0, dtype=np.int64)
    mask = points_in_box_mask(cloud.points, box)
    idx = np.flatnonzero(mask).astype(np.int64)
    return PointCloud._wrap(cloud.points[idx]), idx


def crop_points_by_mask(cloud: PointCloud, mask) -> PointCloud:
    """Select rows by index list; order preserved, duplicates rejected."""
    idx = np.asarray(mask, dtype=np.int64)
    if idx.ndim != 1:
        raise InputError("mask must be a flat index list")
    if idx.size:
        if idx.min() < 0 or idx.max() >= len(cloud):
            raise InputError(
                f"mask index out of range for cloud of {len(cloud)} points"
            )
        if np.unique(idx).size != idx.size:
            raise InputError("mask contains duplicate indices")
    return PointCloud._wrap(cloud.points[idx])


def bev_params(box: OrientedBox3D) -> tuple:
    """Precomputed BEV collision parameters:
    (cx, cy, cos, sin, hx, hy, aabb_ex, aabb_ey, z0, z1)."""
    c = math.cos(box.yaw)
    s = math.sin(box.yaw)
    hx = box.size[0] / 2.0
    hy = box.size[1] / 2.0
    ac = abs(c)
    as_ = abs(s)
    z0, z1 = box.z_interval()
    return (
        box.center[0],
        box.center[1],
        c,
        s,
        hx,
        hy,
        hx * ac + hy * as_,
        hx * as_ + hy * ac,
        z0,
        z1,
    )


def bev_overlap_params(p: tuple, q: tuple) -> bool:
    """Separating-axis overlap test on precomputed bev_params tuples."""
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    # world-axis AABB rejection; a cheap separating-axis pair of its own
    if abs(dx) >= p[6] + q[6] or abs(dy) >= p[7] + q[7]:
        return False
    ca, sa, hax, hay = p[2], p[3], p[4], p[5]
    cb, sb, hbx, hby = q[2], q[3], q[4], q[5]
    for ux, uy in ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb)):
        t = abs(dx * ux + dy * uy)
        ra = hax * abs(ca * ux + sa * uy) + hay * abs(ca * uy - sa * ux)
        rb = hbx * abs(cb * ux + sb * uy) + hby * abs(cb * uy - sb * ux)
        if t >= ra + rb:
            return False
    return True


def bev_overlap(a: OrientedBox3D, b: OrientedBox3D) -> bool:
    """True iff the yaw-rotated BEV rectangles intersect with positive area.

    Separating-axis test over the four edge normals. Touching edges or
    corners do not count as overlap.
    """
    return bev_overlap_params(bev_params(a), bev_params(b))


def _clip_polygon(subject: list[tuple[float, float]], clip_corners) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a polygon against a CCW convex polygon."""
    output = subject
    n = len(clip_corners)
    for i in range(n):
        if not output:
            break
        ex0, ey0 = clip_corners[i]
        ex1, ey1 = clip_corners[(i + 1) % n]
        edx = ex1 - ex0
        edy = ey1 - ey0
        inp = output
        output = []
        m = len(inp)
        for j in range(m):
            cx, cy = inp[j]
            px, py = inp[j - 1]
            cur_in = edx * (cy - ey0) - edy * (cx - ex0) >= 0.0
            prev_in = edx * (py - ey0) - edy * (px - ex0) >= 0.0
            if cur_in:
                if not prev_in:
                    pt = _segment_line_intersection(px, py, cx, cy, ex0, ey0, ex1, ey1)
                    if pt is not None:
                        output.append(pt)
                output.append((cx, cy))
            elif prev_in:
                pt = _segment_line_intersection(px, py, cx, cy, ex0, ey0, ex1, ey1)
                if pt is not None:
                    output.append(pt)
    return output


def _segment_line_intersection(px, py, cx, cy, ex0, ey0, ex1, ey1):
    dx1 = cx - px
    dy1 = cy - py
    dx2 = ex1 - ex0
    dy2 = ey1 - ey0
    denom = dx1 * dy2 - dy1 * dx2
    if denom == 0.0:
        return None
    t = ((ex0 - px) * dy2 - (ey0 - py) * dx2) / denom
    return (px + t * dx1, py + t * dy1)


def _polygon_area(poly) -> float:
    """Shoelace area; positive for CCW polygons."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def _bev_intersection_area(a: OrientedBox3D, b: OrientedBox3D) -> float:
    ca = [tuple(p) for p in a.bev_corners()]
    cb = [tuple(p) for p in b.bev_corners()]
    inter = _clip_polygon(ca, cb)
    area = _polygon_area(inter)
    if area <= AREA_EPS:
        return 0.0
    return area


def rotated_iou_bev(a: OrientedBox3D, b: OrientedBox3D) -> float:
    """BEV IoU of two yaw-rotated rectangles via polygon clipping."""
    inter = _bev_intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    area_a = _polygon_area([tuple(p) for p in a.bev_corners()])
    area_b = _polygon_area([tuple(p) for p in b.bev_corners()])
    union = area_a + area_b - inter
    if union < UNION_EPS:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def z_overlap_length(a: OrientedBox3D, b: OrientedBox3D) -> float:
    """Length of the vertical-interval intersection (0 when disjoint)."""
    a0, a1 = a.z_interval()
    b0, b1 = b.z_interval()
    return max(0.0, min(a1, b1) - max(a0, b0))


def iou_3d(a: OrientedBox3D, b: OrientedBox3D) -> float:
    """3D IoU of two upright boxes: clipped BEV area times z-interval overlap."""
    inter_area = _bev_intersection_area(a, b)
    if inter_area == 0.0:
        return 0.0
    dz = z_overlap_length(a, b)
    if dz <= 0.0:
        return 0.0
    inter_vol = inter_area * dz
    union = a.volume + b.volume - inter_vol
    if union < UNION_EPS:
        return 0.0
    return min(max(inter_vol / union, 0.0), 1.0)

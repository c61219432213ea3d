import math

import numpy as np
import pytest
from hypothesis import strategies as st

from semisample.geometry import OrientedBox3D, PointCloud
from semisample.pointcloud_io import Label, LabelSource
from semisample.rng import DetRng
from semisample.sample_db import ObjectSample


finite_coord = st.floats(min_value=-30.0, max_value=30.0, allow_nan=False, allow_infinity=False)
box_size = st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False)
yaw_angle = st.floats(min_value=-math.pi, max_value=math.pi - 1e-9, allow_nan=False)


@st.composite
def boxes(draw):
    center = (draw(finite_coord), draw(finite_coord), draw(finite_coord))
    size = (draw(box_size), draw(box_size), draw(box_size))
    return OrientedBox3D(center, size, draw(yaw_angle))


@st.composite
def box_pairs_nearby(draw):
    """Pairs with centers close enough that overlap happens often."""
    a = draw(boxes())
    dx = draw(st.floats(min_value=-6.0, max_value=6.0, allow_nan=False))
    dy = draw(st.floats(min_value=-6.0, max_value=6.0, allow_nan=False))
    dz = draw(st.floats(min_value=-3.0, max_value=3.0, allow_nan=False))
    size = (draw(box_size), draw(box_size), draw(box_size))
    b = OrientedBox3D(
        (a.center[0] + dx, a.center[1] + dy, a.center[2] + dz), size, draw(yaw_angle)
    )
    return a, b


def random_cloud(np_rng, n=50, channel_count=4, extent=10.0):
    pts = np_rng.uniform(-extent, extent, size=(n, channel_count))
    if channel_count > 3:
        pts[:, 3:] = np_rng.random((n, channel_count - 3))
    return PointCloud(pts.astype(np.float32).astype(np.float64))


def make_sample(category, box, score=1.0, source_frame="src", n_points=20, channel_count=4, seed=0):
    """An ObjectSample whose points genuinely lie inside its box."""
    rng = np.random.default_rng(seed)
    local = (rng.random((n_points, 3)) - 0.5) * np.asarray(box.size)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    pts = np.empty((n_points, channel_count))
    pts[:, 0] = box.center[0] + local[:, 0] * c - local[:, 1] * s
    pts[:, 1] = box.center[1] + local[:, 0] * s + local[:, 1] * c
    pts[:, 2] = box.center[2] + local[:, 2]
    if channel_count > 3:
        pts[:, 3:] = rng.random((n_points, channel_count - 3))
    pts = pts.astype(np.float32).astype(np.float64)
    return ObjectSample(category, PointCloud(pts), box, score, source_frame)


def gt_label(category, center, size=(1.0, 1.0, 1.0), yaw=0.0):
    return Label(category, OrientedBox3D(center, size, yaw), None, LabelSource.GROUNDTRUTH)


def pseudo_label(category, center, score, size=(1.0, 1.0, 1.0), yaw=0.0):
    return Label(category, OrientedBox3D(center, size, yaw), score, LabelSource.PSEUDO)


@pytest.fixture
def det_rng():
    return DetRng.from_key(1234, "test")


@pytest.fixture
def np_rng():
    return np.random.default_rng(0)

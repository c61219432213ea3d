"""Collision-aware gt/pseudo sample-paste augmentation for 3D point clouds.

Builds object-sample databases from labeled and pseudo-labeled frames,
pastes samples into frames under collision constraints and score
thresholds, and ships a desk-scale teacher-student simulation harness with
an AP evaluator so the pipeline's behavior is measurable without training
neural networks.
"""

from .augmentor import (
    AugmentationConfig,
    AugmentedFrame,
    CollisionMode,
    InsertionReport,
    PlacedSample,
    apply_insertions,
    augment_labeled_frame,
    augment_unlabeled_frame,
    fade_active,
    plan_insertions,
    shuffle_categories,
)
from .errors import FormatError, InputError, NotFoundError, SemisampleError
from .evaluation import ApResult, evaluate_ap, match_frame
from .geometry import (
    OrientedBox3D,
    PointCloud,
    bev_overlap,
    crop_points_by_mask,
    crop_points_in_box,
    iou_3d,
    normalize_yaw,
    point_in_box,
    rotated_iou_bev,
)
from .pointcloud_io import (
    Frame,
    Label,
    LabelSource,
    RunManifest,
    load_frame,
    read_labels,
    read_points_bin,
    save_frame,
    write_labels,
    write_points_bin,
)
from .rng import DetRng
from .sample_db import (
    DatabaseView,
    ObjectSample,
    SampleDatabase,
    build_gt_database,
    build_pseudo_database,
    db_stats,
    draw_samples,
    filter_by_score,
    load_db,
    save_db,
)
from .simulation import (
    EpochMetrics,
    ModelState,
    NoiseModel,
    SimulationConfig,
    ema_update,
    filter_pseudo_labels,
    run_simulation,
    synthetic_detect,
)

__version__ = "0.1.0"

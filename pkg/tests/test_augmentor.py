import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semisample.augmentor import (
    AugmentationConfig,
    CollisionMode,
    apply_insertions,
    augment_labeled_frame,
    augment_unlabeled_frame,
    fade_active,
    plan_insertions,
    shuffle_categories,
)
from semisample.errors import InputError
from semisample.geometry import OrientedBox3D, PointCloud, rotated_iou_bev, z_overlap_length
from semisample.pointcloud_io import Frame, Label, LabelSource
from semisample.rng import DetRng
from semisample.sample_db import build_gt_database, build_pseudo_database

from conftest import gt_label, make_sample, pseudo_label


def _cfg(**kw):
    base = dict(
        samples_per_category={"car": 2, "ped": 2},
        tau_pseudo_sample={"car": 0.5, "ped": 0.5},
        gt_on_labeled=True,
        pseudo_on_labeled=False,
        gt_on_unlabeled=False,
        pseudo_on_unlabeled=False,
        category_shuffle=False,
        seed=0,
    )
    base.update(kw)
    return AugmentationConfig(**base)


def _gt_db(specs, categories=("car", "ped")):
    """In-memory gt database from (category, center) specs."""
    samples = [make_sample(c, OrientedBox3D(ctr, (1.5, 1.5, 1.5), 0.0), seed=i)
               for i, (c, ctr) in enumerate(specs)]
    frame_pts = np.concatenate([s.points.points for s in samples])
    labels = [Label(s.category, s.box, None, LabelSource.GROUNDTRUTH) for s in samples]
    frame = Frame("src", PointCloud(frame_pts), labels)
    return build_gt_database([frame], min_points=1, categories=categories)


def _pseudo_db(specs, categories=("car", "ped")):
    """Pseudo database from (category, center, score) specs."""
    samples = [make_sample(c, OrientedBox3D(ctr, (1.5, 1.5, 1.5), 0.0), seed=100 + i)
               for i, (c, ctr, _) in enumerate(specs)]
    frame_pts = np.concatenate([s.points.points for s in samples])
    frame = Frame("usrc", PointCloud(frame_pts), [])
    pseudo = {"usrc": [pseudo_label(c, ctr, score, size=(1.5, 1.5, 1.5)) for c, ctr, score in specs]}
    return build_pseudo_database([frame], pseudo, min_points=1, categories=categories)


def _empty_frame(frame_id="f0", n=30, labels=()):
    rng = np.random.default_rng(hash(frame_id) % 2**32)
    pts = rng.uniform(40, 50, size=(n, 4)).astype(np.float32).astype(np.float64)
    return Frame(frame_id, PointCloud(pts), list(labels))


class TestFadeActive:
    def test_absent_never_fades(self):
        cfg = _cfg(fade_epoch=None)
        assert not fade_active(0, cfg) and not fade_active(10_000, cfg)

    def test_boundary_at_30(self):
        cfg = _cfg(fade_epoch=30)
        assert not fade_active(29, cfg)
        assert fade_active(30, cfg)
        assert fade_active(64, cfg)

    def test_zero_disables_from_start(self):
        assert fade_active(0, _cfg(fade_epoch=0))

    def test_negative_epoch_rejected(self):
        with pytest.raises(InputError):
            fade_active(-1, _cfg())


class TestShuffleCategories:
    def test_single_category(self, det_rng):
        assert shuffle_categories(["car"], det_rng, True) == ["car"]

    def test_off_keeps_order(self, det_rng):
        assert shuffle_categories(["a", "b", "c"], det_rng, False) == ["a", "b", "c"]

    def test_empty_rejected(self, det_rng):
        with pytest.raises(InputError):
            shuffle_categories([], det_rng, True)

    def test_first_position_uniform(self):
        rng = DetRng.from_key(3, "shuffle-test")
        n = 60_000
        firsts = {"a": 0, "b": 0, "c": 0}
        for _ in range(n):
            firsts[shuffle_categories(["a", "b", "c"], rng, True)[0]] += 1
        for count in firsts.values():
            assert abs(count / n - 1 / 3) < 0.01


class TestPlanInsertions:
    def test_candidate_overlapping_occupied_rejected(self):
        occupied = [OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0)]
        cand = make_sample("car", OrientedBox3D((0.5, 0, 0), (2, 2, 2), 0.0))
        assert plan_insertions(occupied, [cand]) == []

    def test_greedy_order_between_candidates(self):
        a = make_sample("car", OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0), seed=1)
        b = make_sample("car", OrientedBox3D((0.5, 0, 0), (2, 2, 2), 0.0), seed=2)
        accepted = plan_insertions([], [a, b])
        assert accepted == [a]

    def test_chair_under_table_mode_dependent(self):
        # stacked boxes: overlapping footprints, disjoint vertical intervals
        table = OrientedBox3D((0, 0, 0.75), (1.4, 0.9, 0.1), 0.0)
        chair = make_sample("chair", OrientedBox3D((0, 0, 0.25), (0.6, 0.6, 0.5), 0.0))
        assert plan_insertions([table], [chair], CollisionMode.FULL3D) == [chair]
        assert plan_insertions([table], [chair], CollisionMode.BEV) == []

    def test_accepted_set_grows(self):
        far = [make_sample("car", OrientedBox3D((i * 5.0, 0, 0), (2, 2, 2), 0.0), seed=i)
               for i in range(3)]
        assert len(plan_insertions([], far)) == 3


class TestApplyInsertions:
    def test_no_accepted_is_identity(self, np_rng):
        cloud = PointCloud(np_rng.random((10, 4)))
        assert apply_insertions(cloud, []) is cloud

    def test_counting_into_empty_space(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(30, 40, size=(1000, 4))
        cloud = PointCloud(pts)
        sample = make_sample("car", OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0), n_points=100)
        out = apply_insertions(cloud, [sample], remove_occluded_points=True)
        assert len(out) == 1100

    def test_occluded_points_removed(self):
        rng = np.random.default_rng(0)
        outside = rng.uniform(30, 40, size=(993, 4))
        box = OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0)
        inside = rng.uniform(-0.9, 0.9, size=(7, 4))
        cloud = PointCloud(np.concatenate([outside, inside]))
        sample = make_sample("car", box, n_points=100)
        out = apply_insertions(cloud, [sample], remove_occluded_points=True)
        assert len(out) == 1000 - 7 + 100
        kept = apply_insertions(cloud, [sample], remove_occluded_points=False)
        assert len(kept) == 1100

    def test_sample_points_appended_in_order(self):
        cloud = PointCloud(np.full((5, 4), 50.0))
        s1 = make_sample("car", OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0), n_points=3, seed=1)
        s2 = make_sample("car", OrientedBox3D((10, 0, 0), (2, 2, 2), 0.0), n_points=4, seed=2)
        out = apply_insertions(cloud, [s1, s2])
        assert np.array_equal(out.points[5:8], s1.points.points)
        assert np.array_equal(out.points[8:], s2.points.points)

    def test_channel_mismatch(self):
        cloud = PointCloud(np.zeros((5, 5)))
        sample = make_sample("car", OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0), channel_count=4)
        with pytest.raises(InputError):
            apply_insertions(cloud, [sample])


class TestAugmentLabeledFrame:
    def test_no_strategies_is_noop(self):
        frame = _empty_frame(labels=[gt_label("car", (0, 0, 0))])
        cfg = _cfg(gt_on_labeled=False)
        af = augment_labeled_frame(frame, None, None, cfg, 0, DetRng.from_key(0, "f0", 0))
        assert af.cloud is frame.cloud
        assert af.supervising_labels == frame.labels
        assert af.report.total_attempted() == 0 and af.report.total_accepted() == 0

    def test_empty_db_is_noop_with_zero_report(self):
        frame = _empty_frame(labels=[gt_label("car", (0, 0, 0))])
        db = build_gt_database([_empty_frame("src")], categories=("car", "ped"))
        af = augment_labeled_frame(frame, db, None, _cfg(), 0, DetRng.from_key(0, "f0", 0))
        assert af.cloud == frame.cloud
        assert af.report.attempted == {"car": 0, "ped": 0}
        assert af.report.accepted == {"car": 0, "ped": 0}

    def test_tau_one_blocks_all_pseudo(self):
        frame = _empty_frame(labels=[gt_label("car", (0, 0, 0))])
        pdb = _pseudo_db([("car", (5, 0, 0), 0.9), ("ped", (9, 0, 0), 0.95)])
        cfg = _cfg(gt_on_labeled=False, pseudo_on_labeled=True,
                   tau_pseudo_sample={"car": 1.0, "ped": 1.0})
        af = augment_labeled_frame(frame, None, pdb, cfg, 0, DetRng.from_key(0, "f0", 0))
        assert af.cloud == frame.cloud
        assert af.report.total_accepted() == 0

    def test_supervising_labels_extend_groundtruth(self):
        anchor = gt_label("car", (0, 0, 0))
        frame = _empty_frame(labels=[anchor])
        gdb = _gt_db([("car", (6, 0, 0)), ("ped", (12, 0, 0))])
        pdb = _pseudo_db([("car", (18, 0, 0), 0.9)])
        cfg = _cfg(pseudo_on_labeled=True)
        af = augment_labeled_frame(frame, gdb, pdb, cfg, 0, DetRng.from_key(0, "f0", 0))
        assert af.supervising_labels[0] == anchor
        pasted = af.supervising_labels[1:]
        assert len(pasted) == af.report.total_accepted() == 3
        sources = {lb.source for lb in pasted}
        assert sources == {LabelSource.PASTED_GT, LabelSource.PASTED_PSEUDO}
        for lb in pasted:
            if lb.source == LabelSource.PASTED_PSEUDO:
                assert lb.score == 0.9
            else:
                assert lb.score == 1.0
        assert af.collision_anchors == []

    def test_fade_returns_frame_unchanged(self):
        frame = _empty_frame(labels=[gt_label("car", (0, 0, 0))])
        gdb = _gt_db([("car", (6, 0, 0))])
        af = augment_labeled_frame(frame, gdb, None, _cfg(fade_epoch=2), 5, DetRng.from_key(0, "f0", 5))
        assert af.cloud is frame.cloud
        assert af.report.total_attempted() == 0

    def test_rejects_pseudo_labels_on_frame(self):
        frame = _empty_frame(labels=[pseudo_label("car", (0, 0, 0), 0.5)])
        with pytest.raises(InputError):
            augment_labeled_frame(frame, None, None, _cfg(), 0, DetRng.from_key(0))

    def test_deterministic(self):
        frame = _empty_frame(labels=[gt_label("car", (0, 0, 0))])
        gdb = _gt_db([("car", (i * 4.0, 0, 0)) for i in range(8)])
        cfg = _cfg(category_shuffle=True)
        a = augment_labeled_frame(frame, gdb, None, cfg, 0, DetRng.from_key(9, "f0", 0))
        b = augment_labeled_frame(frame, gdb, None, cfg, 0, DetRng.from_key(9, "f0", 0))
        assert a.cloud == b.cloud
        assert a.supervising_labels == b.supervising_labels


class TestAugmentUnlabeledFrame:
    def test_anchor_thresholding(self):
        frame = _empty_frame("u0")
        pseudo = [pseudo_label("car", (0, 0, 0), 0.6), pseudo_label("car", (5, 0, 0), 0.4)]
        cfg = _cfg(tau_unlabeled_frame=0.5)
        af = augment_unlabeled_frame(frame, pseudo, None, None, cfg, 0, DetRng.from_key(0, "u0", 0))
        assert len(af.collision_anchors) == 1
        assert af.collision_anchors[0].score == 0.6

    def test_discarded_anchor_frees_space(self):
        frame = _empty_frame("u0")
        # candidate lands exactly on the low-score anchor's spot
        gdb = _gt_db([("car", (5.0, 0.0, 0.75))], categories=("car",))
        pseudo = [pseudo_label("car", (5.0, 0.0, 0.75), 0.4, size=(1.5, 1.5, 1.5))]
        cfg = _cfg(samples_per_category={"car": 1}, tau_pseudo_sample={"car": 0.5},
                   gt_on_labeled=False, gt_on_unlabeled=True, tau_unlabeled_frame=0.5)
        af = augment_unlabeled_frame(frame, pseudo, gdb, None, cfg, 0, DetRng.from_key(0, "u0", 0))
        assert af.report.total_accepted() == 1
        low_tau = AugmentationConfig(**{**cfg.__dict__, "tau_unlabeled_frame": 0.0})
        af2 = augment_unlabeled_frame(frame, pseudo, gdb, None, low_tau, 0, DetRng.from_key(0, "u0", 0))
        assert af2.report.total_accepted() == 0

    def test_supervising_always_empty(self):
        frame = _empty_frame("u0")
        gdb = _gt_db([("car", (6, 0, 0)), ("ped", (12, 0, 0))])
        cfg = _cfg(gt_on_labeled=False, gt_on_unlabeled=True)
        af = augment_unlabeled_frame(frame, [pseudo_label("car", (0, 0, 0), 0.9)],
                                     gdb, None, cfg, 0, DetRng.from_key(0, "u0", 0))
        assert af.supervising_labels == []
        assert af.report.total_accepted() > 0

    def test_unscored_pseudo_label_rejected(self):
        frame = _empty_frame("u0")
        bad = Label("car", OrientedBox3D((0, 0, 0), (1, 1, 1), 0), None, LabelSource.PASTED_GT)
        with pytest.raises(InputError):
            augment_unlabeled_frame(frame, [bad], None, None, _cfg(), 0, DetRng.from_key(0))

    def test_anchor_count_monotone_in_tau(self):
        frame = _empty_frame("u0")
        rng = np.random.default_rng(4)
        pseudo = [pseudo_label("car", (i * 3.0, 0, 0), float(s))
                  for i, s in enumerate(rng.random(25))]
        counts = []
        for tau in (0.0, 0.25, 0.5, 0.75, 1.0):
            cfg = _cfg(tau_unlabeled_frame=tau, gt_on_labeled=False)
            af = augment_unlabeled_frame(frame, pseudo, None, None, cfg, 0,
                                         DetRng.from_key(0, "u0", 0))
            counts.append(len(af.collision_anchors))
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 25 and counts[-1] == 0


class TestNoCollisionInvariant:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_accepted_boxes_never_collide(self, seed):
        np_rng = np.random.default_rng(seed)
        anchors = [gt_label("car", (float(x), float(y), 0.75))
                   for x, y in np_rng.uniform(-10, 10, size=(4, 2))]
        frame = _empty_frame(f"f{seed}", labels=anchors)
        gdb = _gt_db([("car", tuple(c) + (0.75,)) for c in np_rng.uniform(-10, 10, size=(6, 2))],
                     categories=("car", "ped"))
        cfg = _cfg(samples_per_category={"car": 4, "ped": 2}, category_shuffle=True)
        af = augment_labeled_frame(frame, gdb, None, cfg, 0, DetRng.from_key(seed, "f", 0))
        accepted = [lb.box for lb in af.supervising_labels[len(anchors):]]
        blockers = [lb.box for lb in anchors]
        for i, box in enumerate(accepted):
            for other in blockers + accepted[:i]:
                assert rotated_iou_bev(box, other) <= 1e-9

    def test_point_count_conservation(self):
        rng = np.random.default_rng(1)
        outside = rng.uniform(30, 40, size=(200, 4))
        inside = rng.uniform(-0.7, 0.7, size=(5, 4))
        frame = Frame("f0", PointCloud(np.concatenate([outside, inside])),
                      [gt_label("car", (20, 20, 0))])
        box = OrientedBox3D((0, 0, 0), (2, 2, 2), 0.0)
        gdb = build_gt_database(
            [Frame("src", make_sample("car", box, n_points=50).points,
                   [Label("car", box, None, LabelSource.GROUNDTRUTH)])],
            min_points=1, categories=("car", "ped"))
        cfg = _cfg(samples_per_category={"car": 1})
        af = augment_labeled_frame(frame, gdb, None, cfg, 0, DetRng.from_key(0, "f0", 0))
        assert af.report.total_accepted() == 1
        assert len(af.cloud) == 205 - 5 + 50


class TestConfig:
    def test_threshold_validation(self):
        with pytest.raises(InputError):
            _cfg(tau_unlabeled_frame=1.5)
        with pytest.raises(InputError):
            _cfg(tau_pseudo_sample={"car": -0.1})
        with pytest.raises(InputError):
            _cfg(samples_per_category={"car": -1})
        with pytest.raises(InputError):
            _cfg(fade_epoch=-3)

    def test_presets(self):
        out = AugmentationConfig.outdoor()
        assert out.collision_mode == CollisionMode.BEV
        assert out.tau_pseudo_sample == {"car": 0.8, "pedestrian": 0.7, "cyclist": 0.7}
        assert out.tau_unlabeled_frame == 0.5
        ind = AugmentationConfig.indoor(["chair", "table"])
        assert ind.collision_mode == CollisionMode.FULL3D
        assert ind.samples_per_category == {"chair": 2, "table": 2}

import itertools
import math

import numpy as np
import pytest

from semisample.errors import InputError
from semisample.evaluation import evaluate_ap, match_frame
from semisample.geometry import OrientedBox3D, iou_3d
from semisample.pointcloud_io import Label, LabelSource

from conftest import gt_label, pseudo_label


def _pred(category, center, score, size=(1.0, 1.0, 1.0)):
    return Label(category, OrientedBox3D(center, size, 0.0), score, LabelSource.PSEUDO)


class TestHandWorkedCases:
    def test_tp_then_fp_gives_one(self):
        truth = {"f": [gt_label("car", (0, 0, 0))]}
        preds = {"f": [_pred("car", (0, 0, 0), 0.9), _pred("car", (50, 0, 0), 0.8)]}
        result = evaluate_ap(preds, truth, 0.25, 40)
        assert result.per_category["car"] == 1.0
        assert result.mean_ap == 1.0

    def test_fp_then_tp_gives_half(self):
        truth = {"f": [gt_label("car", (0, 0, 0))]}
        preds = {"f": [_pred("car", (50, 0, 0), 0.9), _pred("car", (0, 0, 0), 0.8)]}
        result = evaluate_ap(preds, truth, 0.25, 40)
        assert result.per_category["car"] == 0.5

    def test_no_predictions_zero(self):
        truth = {"f": [gt_label("car", (0, 0, 0))]}
        assert evaluate_ap({}, truth, 0.25, 40).per_category["car"] == 0.0

    def test_r_zero_rejected(self):
        with pytest.raises(InputError):
            evaluate_ap({}, {"f": [gt_label("car", (0, 0, 0))]}, 0.25, 0)

    def test_map_averages_categories_with_groundtruth(self):
        truth = {"f": [gt_label("car", (0, 0, 0)), gt_label("ped", (5, 0, 0))]}
        preds = {"f": [_pred("car", (0, 0, 0), 0.9), _pred("boat", (9, 9, 9), 0.9)]}
        result = evaluate_ap(preds, truth, 0.25, 40)
        assert set(result.per_category) == {"car", "ped"}
        assert result.mean_ap == pytest.approx(0.5)

    def test_unscored_prediction_rejected(self):
        truth = {"f": [gt_label("car", (0, 0, 0))]}
        bad = Label("car", OrientedBox3D((0, 0, 0), (1, 1, 1), 0), None, LabelSource.PASTED_GT)
        with pytest.raises(InputError):
            evaluate_ap({"f": [bad]}, truth, 0.25, 40)


def oracle_ap(predictions, groundtruths, iou_threshold, recall_positions):
    """AP by exhaustive enumeration of matchings for one category, one frame.

    Enumerates every injective assignment of predictions to groundtruths with
    IoU >= threshold, keeps the unique assignment consistent with a ranked
    greedy sweep (highest score first, claiming the best unclaimed IoU), and
    replays the swept precision/recall directly off the definitions.
    """
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].score)
    iou = [[iou_3d(p.box, g.box) for g in groundtruths] for p in predictions]

    candidates = []
    for assignment in _all_assignments(len(predictions), len(groundtruths)):
        if all(j is None or iou[i][j] >= iou_threshold for i, j in enumerate(assignment)):
            candidates.append(assignment)

    chosen = None
    for assignment in candidates:
        if _greedy_consistent(assignment, order, iou, iou_threshold):
            assert chosen is None, "greedy assignment must be unique"
            chosen = assignment
    assert chosen is not None

    flags = [chosen[i] is not None for i in order]
    total_gt = len(groundtruths)
    if total_gt == 0:
        return 0.0
    acc = 0.0
    for k in range(1, recall_positions + 1):
        r = k / recall_positions
        # max precision over ranks whose recall reaches r
        acc += max(
            (tp / rank for rank, tp in _sweep(flags) if tp / total_gt >= r),
            default=0.0,
        )
    return acc / recall_positions


def _sweep(flags):
    tp = 0
    for rank, flag in enumerate(flags, start=1):
        tp += flag
        yield rank, tp


def _all_assignments(n_pred, n_gt):
    options = [list(range(n_gt)) + [None] for _ in range(n_pred)]
    for combo in itertools.product(*options):
        used = [j for j in combo if j is not None]
        if len(set(used)) == len(used):
            yield combo


def _greedy_consistent(assignment, order, iou, threshold):
    taken = set()
    for i in order:
        best_j, best_iou = None, 0.0
        for j in range(len(iou[i]) if iou else 0):
            if j in taken:
                continue
            v = iou[i][j]
            if v >= threshold and v > best_iou:
                best_iou, best_j = v, j
        if assignment[i] != best_j:
            return False
        if best_j is not None:
            taken.add(best_j)
    return True


class TestAgainstExhaustiveOracle:
    def _random_instance(self, rng):
        n_gt = rng.integers(0, 4)
        n_pred = rng.integers(0, 6)
        gts = [gt_label("car", (float(x), float(y), 0.0), size=(2, 2, 2))
               for x, y in rng.uniform(-6, 6, size=(n_gt, 2))]
        preds = []
        for _ in range(n_pred):
            if n_gt and rng.random() < 0.6:
                base = gts[rng.integers(0, n_gt)].box.center
                center = (base[0] + rng.uniform(-1.2, 1.2), base[1] + rng.uniform(-1.2, 1.2), 0.0)
            else:
                center = tuple(rng.uniform(-8, 8, 2)) + (0.0,)
            preds.append(_pred("car", center, float(rng.random()), size=(2, 2, 2)))
        return preds, gts

    def test_matches_oracle_on_random_tiny_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(120):
            preds, gts = self._random_instance(rng)
            got = evaluate_ap({"f": preds}, {"f": gts}, 0.25, 11).per_category.get("car")
            want = oracle_ap(preds, gts, 0.25, 11) if gts else None
            if gts:
                assert got == pytest.approx(want, abs=1e-12)
            else:
                assert got is None


class TestScoreRescalingInvariance:
    def _instance(self, rng, n_frames=4):
        truth, preds = {}, {}
        for f in range(n_frames):
            fid = f"f{f}"
            gts = [gt_label("car", (float(x), float(y), 0.0), size=(2, 2, 2))
                   for x, y in rng.uniform(-8, 8, size=(rng.integers(1, 4), 2))]
            ps = []
            for g in gts:
                if rng.random() < 0.8:
                    c = g.box.center
                    ps.append(_pred("car", (c[0] + rng.uniform(-1, 1), c[1] + rng.uniform(-1, 1), 0.0),
                                    float(rng.uniform(0.05, 0.95)), size=(2, 2, 2)))
            for _ in range(rng.integers(0, 3)):
                ps.append(_pred("car", tuple(rng.uniform(-9, 9, 2)) + (0.0,),
                                float(rng.uniform(0.05, 0.95)), size=(2, 2, 2)))
            truth[fid], preds[fid] = gts, ps
        return preds, truth

    @pytest.mark.parametrize("rescale", [lambda s: s ** 3, lambda s: 0.1 + 0.8 * s,
                                         lambda s: 1 - math.exp(-3 * s)])
    def test_monotone_rescaling_preserves_ap(self, rescale):
        rng = np.random.default_rng(5)
        preds, truth = self._instance(rng)
        base = evaluate_ap(preds, truth, 0.25, 40)
        rescaled = {
            fid: [Label(p.category, p.box, rescale(p.score), p.source) for p in ps]
            for fid, ps in preds.items()
        }
        again = evaluate_ap(rescaled, truth, 0.25, 40)
        assert again.per_category == base.per_category


class TestMatchFrame:
    def test_highest_iou_wins(self):
        gts = [gt_label("car", (0, 0, 0), size=(2, 2, 2)),
               gt_label("car", (1.0, 0, 0), size=(2, 2, 2))]
        pred = _pred("car", (0.4, 0, 0), 0.9, size=(2, 2, 2))
        flags = match_frame([pred], gts, 0.1)
        assert flags == [True]

    def test_each_gt_claimed_once(self):
        gt = gt_label("car", (0, 0, 0), size=(2, 2, 2))
        p1 = _pred("car", (0.1, 0, 0), 0.9, size=(2, 2, 2))
        p2 = _pred("car", (0.2, 0, 0), 0.8, size=(2, 2, 2))
        assert match_frame([p1, p2], [gt], 0.25) == [True, False]

    def test_threshold_inclusive(self):
        gt = gt_label("car", (0, 0, 0), size=(2, 2, 2))
        pred = _pred("car", (0, 0, 0), 0.9, size=(2, 2, 2))
        assert match_frame([pred], [gt], 1.0) == [True]

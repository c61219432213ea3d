#!/usr/bin/env python3
"""Sweep the unlabeled-frame anchor threshold and report its two competing
effects: how many pseudo labels survive as collision anchors, and how much
room is left to paste samples onto unlabeled frames."""

import argparse
import tempfile
from pathlib import Path

from semisample.augmentor import AugmentationConfig, augment_unlabeled_frame
from semisample.pointcloud_io import Frame
from semisample.rng import DetRng
from semisample.sample_db import build_gt_database
from semisample.simulation import NoiseModel, synthetic_detect
from semisample.synth import generate_dataset, make_scene


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--taus", nargs="+", type=float, default=[0.0, 0.3, 0.5, 0.7, 0.9])
    args = parser.parse_args()

    categories = ("car", "pedestrian", "cyclist")
    root = Path(tempfile.mkdtemp(prefix="semisample_sweep_")) / "ds"
    manifest = generate_dataset(root, n_labeled=6, n_unlabeled=0, seed=args.seed)
    gt_db = build_gt_database([manifest.load_frame(f) for f in manifest.labeled_frames],
                              categories=categories)
    noise = NoiseModel(fp_rate=2.0, drop_rate=0.25)

    print(f"{'tau':>5} {'anchors/frame':>14} {'pastes/frame':>13}")
    for tau in args.taus:
        cfg = AugmentationConfig(
            samples_per_category={"car": 4, "pedestrian": 3, "cyclist": 3},
            tau_unlabeled_frame=tau,
            gt_on_labeled=False, gt_on_unlabeled=True,
            category_shuffle=True,
        )
        anchors = 0
        pastes = 0
        for i in range(args.frames):
            fid = f"sweep{i:05d}"
            scene = make_scene(fid, categories, DetRng.from_key(args.seed, "scene", fid),
                               ground_points=400, objects=(3, 7), extent=14.0)
            truth = scene.labels
            frame = Frame(fid, scene.cloud, [])
            dets = synthetic_detect(truth, noise, 0.5,
                                    DetRng.from_key(args.seed, "det", fid), categories)
            af = augment_unlabeled_frame(frame, dets, gt_db, None, cfg, 0,
                                         DetRng.from_key(args.seed, fid, 0))
            anchors += len(af.collision_anchors)
            pastes += af.report.total_accepted()
        print(f"{tau:>5.2f} {anchors / args.frames:>14.2f} {pastes / args.frames:>13.2f}")


if __name__ == "__main__":
    main()

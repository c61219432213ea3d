#!/usr/bin/env python3
"""Build parity fixtures for the script bindings.

Writes a synthetic dataset, gt/pseudo databases, and N randomized
(frame, config, seed) cases. Each case's expected output is produced by the
CLI augment path, so an alternative implementation can be checked for
bit-exact agreement.
"""

import argparse
import json
import shutil
from pathlib import Path

import yaml

from semisample.cli import main as cli_main
from semisample.pointcloud_io import write_labels
from semisample.rng import DetRng
from semisample.simulation import NoiseModel, load_truth, synthetic_detect
from semisample.synth import generate_dataset

CATS = ("car", "pedestrian", "cyclist")


def _random_config(rng: DetRng, kind: str) -> dict:
    cfg = {
        "samples_per_category": {c: rng.randbelow(4) for c in CATS},
        "tau_pseudo_sample": {c: round(rng.uniform(0.3, 0.9), 3) for c in CATS},
        "tau_unlabeled_frame": round(rng.uniform(0.0, 0.9), 3),
        "gt_on_labeled": rng.random() < 0.75,
        "pseudo_on_labeled": rng.random() < 0.75,
        "gt_on_unlabeled": rng.random() < 0.75,
        "pseudo_on_unlabeled": rng.random() < 0.75,
        "collision_mode": "full3d" if rng.random() < 0.4 else "bev",
        "category_shuffle": rng.random() < 0.8,
        "fade_epoch": rng.randbelow(4) if rng.random() < 0.15 else None,
        "remove_occluded_points": rng.random() < 0.85,
        "seed": rng.randbelow(1_000_000),
    }
    if kind == "labeled" and not (cfg["gt_on_labeled"] or cfg["pseudo_on_labeled"]):
        cfg["gt_on_labeled"] = True
    if kind == "unlabeled" and not (cfg["gt_on_unlabeled"] or cfg["pseudo_on_unlabeled"]):
        cfg["pseudo_on_unlabeled"] = True
    return cfg


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)

    manifest = generate_dataset(out / "ds", categories=CATS, n_labeled=6, n_unlabeled=6,
                                seed=args.seed, ground_points=1200, objects=(3, 7),
                                object_points=(40, 120), extent=16.0)
    pseudo_dir = out / "pseudo"
    pseudo_dir.mkdir()
    noise = NoiseModel(fp_rate=1.0)
    for fid in manifest.unlabeled_frames:
        dets = synthetic_detect(load_truth(manifest, fid), noise, 0.55,
                                DetRng.from_key(args.seed, "det", fid), CATS)
        (pseudo_dir / f"{fid}.labels").write_text(write_labels(dets))

    assert cli_main(["build-gt-db", "--manifest", str(out / "ds"),
                     "--out", str(out / "gt_db")]) == 0
    assert cli_main(["build-pseudo-db", "--manifest", str(out / "ds"),
                     "--pseudo-labels", str(pseudo_dir), "--out", str(out / "pseudo_db"),
                     "--min-score", "0.2"]) == 0

    rng = DetRng.from_key(args.seed, "cases")
    case_names = []
    for i in range(args.count):
        kind = "labeled" if i % 2 == 0 else "unlabeled"
        pool = manifest.labeled_frames if kind == "labeled" else manifest.unlabeled_frames
        fid = pool[rng.randbelow(len(pool))]
        epoch = rng.randbelow(5)
        cfg = _random_config(rng, kind)

        case_dir = out / "cases" / f"case_{i:03d}"
        case_dir.mkdir(parents=True)
        # keep key order identical in both serializations: the category
        # queue follows samples_per_category's order
        (case_dir / "config.yaml").write_text(
            yaml.safe_dump({"augmentation": cfg}, sort_keys=False))
        (case_dir / "case.json").write_text(json.dumps({
            "frame_id": fid, "kind": kind, "epoch": epoch, "config": cfg}, indent=1))

        argv = ["augment", "--manifest", str(out / "ds"),
                "--gt-db", str(out / "gt_db"), "--pseudo-db", str(out / "pseudo_db"),
                "--pseudo-labels", str(pseudo_dir),
                "--config", str(case_dir / "config.yaml"),
                "--frame", fid, "--epoch", str(epoch),
                "--out", str(case_dir / "expected")]
        rc = cli_main(argv)
        assert rc == 0, f"case {i} failed with exit {rc}"
        case_names.append(f"case_{i:03d}")

    (out / "cases.json").write_text(json.dumps(case_names, indent=1))
    print(f"wrote {len(case_names)} parity cases under {out}")


if __name__ == "__main__":
    main()

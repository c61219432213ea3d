#!/usr/bin/env python3
"""Generate a synthetic point-cloud dataset with labeled/unlabeled/eval splits."""

import argparse
from pathlib import Path

from semisample.synth import generate_dataset


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="dataset root directory")
    parser.add_argument("--labeled", type=int, default=8)
    parser.add_argument("--unlabeled", type=int, default=16)
    parser.add_argument("--eval", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--categories", nargs="+", default=["car", "pedestrian", "cyclist"])
    parser.add_argument("--ground-points", type=int, default=1500)
    parser.add_argument("--extent", type=float, default=25.0)
    args = parser.parse_args()

    manifest = generate_dataset(
        Path(args.out),
        categories=tuple(args.categories),
        n_labeled=args.labeled,
        n_unlabeled=args.unlabeled,
        n_eval=args.eval,
        seed=args.seed,
        ground_points=args.ground_points,
        extent=args.extent,
    )
    total = len(manifest.labeled_frames) + len(manifest.unlabeled_frames) + len(manifest.eval_frames)
    print(f"wrote {total} frames under {args.out}")
    print(f"categories: {', '.join(manifest.categories)}")


if __name__ == "__main__":
    main()

"""Command-line entry point.

Subcommands: build-gt-db, build-pseudo-db, augment, simulate, eval,
db-stats, bench. Every subcommand is a thin veneer over the library; all
randomness flows from --seed (or the config's seed), and parallel augment
derives one stream per (seed, frame id, epoch) so outputs do not depend on
the worker count.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing as mp
import sys
import time
from pathlib import Path

from . import config as cfgmod
from .augmentor import (
    AugmentationConfig,
    AugmentedFrame,
    augment_labeled_frame,
    augment_unlabeled_frame,
)
from .errors import InputError, NotFoundError, SemisampleError
from .evaluation import evaluate_ap
from .pointcloud_io import RunManifest, read_labels, write_labels, write_points_bin
from .rng import DetRng
from .sample_db import (
    build_gt_database,
    build_pseudo_database,
    db_stats,
    load_db,
    save_db,
)
from .simulation import run_simulation


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--manifest", required=True, help="dataset root or manifest file")
    p.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")


def _add_aug_overrides(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--preset", choices=["outdoor", "indoor"], help="base config preset")
    p.add_argument("--gt-db", help="gt database directory")
    p.add_argument("--pseudo-db", help="pseudo database directory")
    p.add_argument("--pseudo-labels", help="directory of pseudo label files for unlabeled frames")
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--tau-unlabeled-frame", type=float, default=None)
    p.add_argument("--tau-pseudo-sample", action="append", metavar="CAT=TAU")
    p.add_argument("--samples-per-category", action="append", metavar="CAT=N")
    p.add_argument("--collision-mode", choices=["bev", "full3d"], default=None)
    p.add_argument("--fade-epoch", default=None, help="epoch to fade out sampling, or 'none'")
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--remove-occluded", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--gt-on-labeled", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--pseudo-on-labeled", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--gt-on-unlabeled", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--pseudo-on-unlabeled", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semisample")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-gt-db", help="crop gt samples from labeled frames")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--use-masks", action="store_true")
    p.add_argument("--min-points", type=int, default=5)

    p = sub.add_parser("build-pseudo-db", help="crop pseudo samples from unlabeled frames")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--pseudo-labels", required=True)
    p.add_argument("--min-score", type=float, default=0.0)
    p.add_argument("--min-points", type=int, default=5)

    p = sub.add_parser("augment", help="augment one frame or a whole split")
    _add_common(p)
    _add_aug_overrides(p)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["labeled", "unlabeled", "both"], default="labeled")
    p.add_argument("--frame", action="append", help="augment only these frame ids")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", help="run the teacher-student simulation")
    _add_common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="metrics file (JSON lines, appended)")

    p = sub.add_parser("eval", help="average precision of predictions vs truth")
    p.add_argument("--truth", required=True, help="directory of <frame>.labels truth files")
    p.add_argument("--pred", required=True, help="directory of <frame>.labels predictions")
    p.add_argument("--iou-threshold", action="append", metavar="CAT=IOU")
    p.add_argument("--iou", type=float, default=0.25, help="fallback IoU threshold")
    p.add_argument("--recall-positions", type=int, default=40)

    p = sub.add_parser("db-stats", help="print database statistics")
    p.add_argument("--db", required=True)

    p = sub.add_parser("bench", help="augmentation throughput over a split")
    _add_common(p)
    _add_aug_overrides(p)
    p.add_argument("--split", choices=["labeled", "unlabeled", "both"], default="labeled")
    p.add_argument("--frame", action="append", help="bench only these frame ids")
    p.add_argument("--repeat", type=int, default=1)
    return parser


def _load_aug_config(args, manifest: RunManifest) -> AugmentationConfig:
    if args.config:
        cfg = cfgmod.augmentation_from_config(cfgmod.load_yaml(args.config))
    elif args.preset:
        cfg = cfgmod.preset_augmentation(args.preset, manifest.categories)
    else:
        cfg = AugmentationConfig.outdoor()

    updates = {}
    if args.tau_unlabeled_frame is not None:
        updates["tau_unlabeled_frame"] = args.tau_unlabeled_frame
    if args.tau_pseudo_sample:
        taus = dict(cfg.tau_pseudo_sample)
        taus.update(cfgmod.parse_kv_pairs(args.tau_pseudo_sample, float, "tau"))
        updates["tau_pseudo_sample"] = taus
    if args.samples_per_category:
        spc = dict(cfg.samples_per_category)
        spc.update(cfgmod.parse_kv_pairs(args.samples_per_category, int, "sample count"))
        updates["samples_per_category"] = spc
    if args.collision_mode is not None:
        updates["collision_mode"] = args.collision_mode
    if args.fade_epoch is not None:
        updates["fade_epoch"] = None if str(args.fade_epoch) == "none" else int(args.fade_epoch)
    if args.shuffle is not None:
        updates["category_shuffle"] = args.shuffle
    if args.remove_occluded is not None:
        updates["remove_occluded_points"] = args.remove_occluded
    for flag in ("gt_on_labeled", "pseudo_on_labeled", "gt_on_unlabeled", "pseudo_on_unlabeled"):
        value = getattr(args, flag)
        if value is not None:
            updates[flag] = value
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        from dataclasses import replace

        cfg = replace(cfg, **updates)
    return cfg


def _select_frames(args, manifest: RunManifest) -> list[tuple[str, bool]]:
    """(frame_id, is_labeled) pairs for the requested split or explicit frames."""
    labeled = set(manifest.labeled_frames)
    unlabeled = set(manifest.unlabeled_frames)
    if args.frame:
        out = []
        for fid in args.frame:
            if fid in labeled:
                out.append((fid, True))
            elif fid in unlabeled:
                out.append((fid, False))
            else:
                raise InputError(f"frame {fid!r} is not in the manifest split lists")
        return out
    out = []
    if args.split in ("labeled", "both"):
        out.extend((fid, True) for fid in manifest.labeled_frames)
    if args.split in ("unlabeled", "both"):
        out.extend((fid, False) for fid in manifest.unlabeled_frames)
    return out


def _read_pseudo_labels(pseudo_dir, frame_id: str):
    path = Path(pseudo_dir) / f"{frame_id}.labels"
    if not path.is_file():
        raise NotFoundError(f"pseudo label file not found: {path}")
    return read_labels(path.read_text())


_WORKER = {}


def _augment_one(task):
    fid, is_labeled = task
    ctx = _WORKER
    manifest: RunManifest = ctx["manifest"]
    cfg: AugmentationConfig = ctx["cfg"]
    epoch: int = ctx["epoch"]
    frame = manifest.load_frame(fid)
    rng = DetRng.from_key(cfg.seed, fid, epoch)
    if is_labeled:
        af = augment_labeled_frame(frame, ctx["gt_db"], ctx["pseudo_db"], cfg, epoch, rng)
    else:
        pseudo = _read_pseudo_labels(ctx["pseudo_dir"], fid)
        af = augment_unlabeled_frame(frame, pseudo, ctx["gt_db"], ctx["pseudo_db"], cfg, epoch, rng)
    _write_augmented(ctx["out"], af)
    return fid


def _write_augmented(out_dir, af: AugmentedFrame):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{af.frame_id}.bin").write_bytes(write_points_bin(af.cloud))
    (out / f"{af.frame_id}.labels").write_text(write_labels(af.supervising_labels))
    report = {
        "frame_id": af.frame_id,
        "attempted": af.report.attempted,
        "accepted": af.report.accepted,
        "num_collision_anchors": len(af.collision_anchors),
        "placed": [
            {
                "category": p.label.category,
                "source": p.label.source.value,
                "score": p.label.score,
                "source_frame": p.source_frame,
                "num_points": p.num_points,
            }
            for p in af.report.placed
        ],
    }
    (out / f"{af.frame_id}.report.json").write_text(json.dumps(report, sort_keys=True) + "\n")


def _init_worker(ctx):
    _WORKER.update(ctx)


def _prepare_augment_ctx(args, manifest: RunManifest, cfg: AugmentationConfig, tasks):
    needs_gt = cfg.gt_on_labeled or cfg.gt_on_unlabeled
    needs_pseudo = cfg.pseudo_on_labeled or cfg.pseudo_on_unlabeled
    gt_db = load_db(args.gt_db) if (args.gt_db and needs_gt) else None
    pseudo_db = load_db(args.pseudo_db) if (args.pseudo_db and needs_pseudo) else None
    if needs_gt and gt_db is None:
        raise InputError("--gt-db is required by the enabled gt-sampling strategy")
    if needs_pseudo and pseudo_db is None:
        raise InputError("--pseudo-db is required by the enabled pseudo-sampling strategy")
    if any(not is_labeled for _, is_labeled in tasks) and not args.pseudo_labels:
        raise InputError("--pseudo-labels is required to augment unlabeled frames")
    return {
        "manifest": manifest,
        "cfg": cfg,
        "epoch": args.epoch,
        "gt_db": gt_db,
        "pseudo_db": pseudo_db,
        "pseudo_dir": args.pseudo_labels,
        "out": getattr(args, "out", None),
    }


def _cmd_build_gt_db(args) -> int:
    manifest = RunManifest.load(args.manifest)
    frames = [manifest.load_frame(fid) for fid in manifest.labeled_frames]
    db = build_gt_database(
        frames,
        use_masks=args.use_masks,
        min_points=args.min_points,
        categories=manifest.categories,
        source_manifest_hash=manifest.content_hash,
    )
    save_db(db, args.out)
    print(f"gt database: {len(db)} samples -> {args.out}")
    return 0


def _cmd_build_pseudo_db(args) -> int:
    manifest = RunManifest.load(args.manifest)
    frames = [manifest.load_frame(fid) for fid in manifest.unlabeled_frames]
    pseudo = {fid: _read_pseudo_labels(args.pseudo_labels, fid) for fid in manifest.unlabeled_frames}
    db = build_pseudo_database(
        frames,
        pseudo,
        min_score=args.min_score,
        min_points=args.min_points,
        categories=manifest.categories,
        source_manifest_hash=manifest.content_hash,
    )
    save_db(db, args.out)
    print(f"pseudo database: {len(db)} samples -> {args.out}")
    return 0


def _cmd_augment(args) -> int:
    manifest = RunManifest.load(args.manifest)
    cfg = _load_aug_config(args, manifest)
    tasks = _select_frames(args, manifest)
    if not tasks:
        raise InputError("no frames selected")
    ctx = _prepare_augment_ctx(args, manifest, cfg, tasks)
    if args.workers > 1:
        with mp.get_context("fork").Pool(args.workers, _init_worker, (ctx,)) as pool:
            pool.map(_augment_one, tasks)
    else:
        _init_worker(ctx)
        for task in tasks:
            _augment_one(task)
    print(f"augmented {len(tasks)} frames -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    manifest = RunManifest.load(args.manifest)
    sim_cfg = cfgmod.simulation_from_config(cfgmod.load_yaml(args.config))
    seed = args.seed if args.seed is not None else sim_cfg.augmentation.seed
    history = run_simulation(sim_cfg, manifest, seed, metrics_path=args.out)
    last = history[-1]
    print(
        f"simulated {len(history)} epochs; final teacher skill "
        f"{last.teacher_skill:.4f}, mAP {last.mean_ap:.4f} -> {args.out}"
    )
    return 0


def _labels_by_frame(directory) -> dict:
    directory = Path(directory)
    if not directory.is_dir():
        raise NotFoundError(f"directory not found: {directory}")
    out = {}
    for path in sorted(directory.glob("*.labels")):
        out[path.stem] = read_labels(path.read_text())
    return out


def _cmd_eval(args) -> int:
    truth = _labels_by_frame(args.truth)
    preds = _labels_by_frame(args.pred)
    if not truth:
        raise InputError(f"no truth label files in {args.truth}")
    thresholds = cfgmod.parse_kv_pairs(args.iou_threshold, float, "iou threshold")
    result = evaluate_ap(
        preds,
        truth,
        thresholds if thresholds else args.iou,
        args.recall_positions,
    )
    for category, ap in sorted(result.per_category.items()):
        print(f"AP {category}: {ap:.6f}")
    print(f"mAP: {result.mean_ap:.6f}")
    return 0


def _cmd_db_stats(args) -> int:
    stats = db_stats(load_db(args.db))
    print(f"kind: {stats['kind']}")
    print(f"channel_count: {stats['channel_count']}")
    print(f"total: {stats['total']}")
    for category, count in stats["per_category"].items():
        print(f"  {category}: {count}")
    print("point counts:")
    for name, count in stats["point_count_histogram"].items():
        if count:
            print(f"  {name}: {count}")
    print("scores:")
    for name, count in stats["score_histogram"].items():
        if count:
            print(f"  {name}: {count}")
    return 0


def _cmd_bench(args) -> int:
    manifest = RunManifest.load(args.manifest)
    cfg = _load_aug_config(args, manifest)
    tasks = _select_frames(args, manifest)
    if not tasks:
        raise InputError("no frames selected")
    ctx = _prepare_augment_ctx(args, manifest, cfg, tasks)
    frames = {fid: manifest.load_frame(fid) for fid, _ in tasks}
    pseudo = {
        fid: _read_pseudo_labels(args.pseudo_labels, fid)
        for fid, is_labeled in tasks
        if not is_labeled
    }
    total_points = 0
    start = time.perf_counter()
    for fid, is_labeled in tasks * args.repeat:
        rng = DetRng.from_key(cfg.seed, fid, args.epoch)
        if is_labeled:
            af = augment_labeled_frame(
                frames[fid], ctx["gt_db"], ctx["pseudo_db"], cfg, args.epoch, rng
            )
        else:
            af = augment_unlabeled_frame(
                frames[fid], pseudo[fid], ctx["gt_db"], ctx["pseudo_db"], cfg, args.epoch, rng
            )
        total_points += len(af.cloud)
    elapsed = time.perf_counter() - start
    count = len(tasks) * args.repeat
    fps = count / elapsed if elapsed > 0 else float("inf")
    print(f"augmentations: {count}")
    print(f"elapsed_s: {elapsed:.3f}")
    print(f"augment_fps: {fps:.1f}")
    return 0


_COMMANDS = {
    "build-gt-db": _cmd_build_gt_db,
    "build-pseudo-db": _cmd_build_pseudo_db,
    "augment": _cmd_augment,
    "simulate": _cmd_simulate,
    "eval": _cmd_eval,
    "db-stats": _cmd_db_stats,
    "bench": _cmd_bench,
}


def _tune_allocator():
    """Keep freed multi-megabyte buffers in the heap instead of returning
    them to the OS; augmentation churns through frame-sized temporaries and
    mmap/munmap cycles dominate its runtime otherwise."""
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 512 * 1024 * 1024)  # M_MMAP_THRESHOLD
        libc.mallopt(-1, 512 * 1024 * 1024)  # M_TRIM_THRESHOLD
    except OSError:
        pass


def main(argv=None) -> int:
    _tune_allocator()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except (SemisampleError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

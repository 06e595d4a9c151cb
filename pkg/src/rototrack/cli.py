"""Command-line entry points: track, eval, bench, serve."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .geometry import (CurveError, load_curve_file, load_mask_png,
                       save_curve_file, save_mask_png)
from .imagery import FrameError, list_frames, load_frame
from .pipeline import (CSV_HEADER, ConfigError, RunConfig, compute_metrics,
                       track_sequence)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_LOSS = 2


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig.from_preset(getattr(args, "preset", "full"))
    if getattr(args, "seed", None) is not None:
        config = RunConfig.from_preset(
            config.preset, **{**_config_dict(config), "seed": args.seed})
    return config


def _config_dict(config: RunConfig) -> dict:
    from dataclasses import fields
    out = {f.name: getattr(config, f.name) for f in fields(RunConfig)}
    out.pop("preset")
    return out


def cmd_track(args) -> int:
    try:
        frame_paths = list_frames(args.frames_dir)
    except OSError as exc:
        print(f"error: cannot list frames: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        start_index, init_curve = load_curve_file(args.init_curve)
    except CurveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if start_index < 0 or start_index >= len(frame_paths) - 1:
        print(f"error: init curve frame_index {start_index} leaves nothing "
              f"to track ({len(frame_paths)} frames found)", file=sys.stderr)
        return EXIT_INPUT
    try:
        config = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    paths = frame_paths[start_index:]
    try:
        frames = [load_frame(p) for p in paths]
    except FrameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if not init_curve.in_bounds(frames[0].width, frames[0].height):
        print("error: init curve has out-of-bounds vertices", file=sys.stderr)
        return EXIT_INPUT
    if not init_curve.is_simple():
        print("error: init curve self-intersects", file=sys.stderr)
        return EXIT_INPUT
    gt_masks = None
    if args.gt:
        gt_masks = []
        for p in paths:
            gp = os.path.join(args.gt, os.path.basename(p))
            gt_masks.append(load_mask_png(gp) if os.path.exists(gp) else None)
    out = args.out
    curves_dir = os.path.join(out, "curves")
    masks_dir = os.path.join(out, "masks")
    os.makedirs(curves_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)
    checkpoint_dir = None
    if args.checkpoint:
        checkpoint_dir = os.path.join(out, "checkpoints")
        os.makedirs(checkpoint_dir, exist_ok=True)

    rows = []

    def on_result(result):
        name = f"{result.frame_index:05d}"
        save_curve_file(os.path.join(curves_dir, name + ".json"),
                        result.frame_index, result.curve)
        save_mask_png(os.path.join(masks_dir, name + ".png"), result.mask)
        rows.append(result)
        if not args.quiet:
            iou = "-" if result.iou is None else f"{result.iou:.3f}"
            print(f"frame {result.frame_index}: iou {iou} "
                  f"e {result.energy.total:.1f} "
                  f"({result.wall_time * 1000:.0f} ms)")

    try:
        results = track_sequence(frames, init_curve, config, gt_masks=gt_masks,
                                 progress=on_result,
                                 checkpoint_dir=checkpoint_dir,
                                 start_index=start_index)
    except (CurveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    with open(os.path.join(out, "metrics.csv"), "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in results:
            fh.write(r.csv_row() + "\n")
    lost = any("lost_degenerate" in r.flags for r in results)
    ious = [r.iou for r in results if r.iou is not None]
    summary = {
        "frames": len(results),
        "mean_iou": float(np.mean(ious)) if ious else None,
        "mean_accuracy": (float(np.mean([r.accuracy for r in results
                                         if r.accuracy is not None]))
                          if ious else None),
        "lost": lost,
        "preset": config.preset,
        "seed": config.seed,
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.quiet and ious:
        print(f"mean IoU {summary['mean_iou']:.3f}")
    return EXIT_LOSS if lost else EXIT_OK


def cmd_eval(args) -> int:
    pred_names = sorted(n for n in os.listdir(args.pred_dir)
                        if n.endswith(".png"))
    gt_names = sorted(n for n in os.listdir(args.gt_dir)
                      if n.endswith(".png"))
    gt_set = set(gt_names)
    missing = [n for n in gt_names if n not in set(pred_names)]
    evaluable = [n for n in pred_names if n in gt_set]
    if missing:
        print("error: missing predictions for: " + ", ".join(missing),
              file=sys.stderr)
        return EXIT_INPUT
    if not evaluable:
        print("error: no overlapping mask files", file=sys.stderr)
        return EXIT_INPUT
    rows = []
    for name in evaluable:
        pred = load_mask_png(os.path.join(args.pred_dir, name))
        gt = load_mask_png(os.path.join(args.gt_dir, name))
        try:
            acc, iou = compute_metrics(pred, gt)
        except ValueError as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        rows.append((name, acc, iou))
        print(f"{name}: accuracy {acc:.4f} iou {iou:.4f}")
    mean_acc = float(np.mean([r[1] for r in rows]))
    mean_iou = float(np.mean([r[2] for r in rows]))
    print(f"mean: accuracy {mean_acc:.4f} iou {mean_iou:.4f}")
    csv_path = args.csv or os.path.join(args.pred_dir, "eval.csv")
    with open(csv_path, "w") as fh:
        fh.write("name,accuracy,iou\n")
        for name, acc, iou in rows:
            fh.write(f"{name},{acc:.6f},{iou:.6f}\n")
        fh.write(f"mean,{mean_acc:.6f},{mean_iou:.6f}\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import bench

    n_frames = 8 if args.quick else 30
    print(f"ablation suite ({n_frames} frames per sequence)...")
    table, rows = bench.ablation_table(n_frames=n_frames, seed=args.seed,
                                       workers=args.workers)
    print(bench.format_ablation(table))
    ordered = (table["baseline"] <= table["lean"] <= table["medium"]
               <= table["full"])
    gap = table["full"] - table["baseline"]
    print(f"ordering {'holds' if ordered else 'VIOLATED'}; "
          f"full - baseline = {gap:.3f}")
    print("\nwarp comparison on the large-displacement set...")
    wtable, _ = bench.warp_comparison(n_frames=n_frames, seed=args.seed,
                                      workers=args.workers)
    print(bench.format_warp(wtable))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.json"), "w") as fh:
            json.dump({"ablation": table, "warp": wtable,
                       "rows": [{k: v for k, v in r.items() if k != "ious"}
                                for r in rows]}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve_forever

    try:
        return serve_forever(args.frames_dir, args.port, args.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rototrack",
        description="Closed-curve object tracking for rotoscoping.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("track", help="propagate a curve through a frame dir")
    p.add_argument("frames_dir")
    p.add_argument("init_curve", help="curve JSON ({frame_index, vertices})")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--preset", default="full",
                   choices=("baseline", "lean", "medium", "full"))
    p.add_argument("--gt", help="ground-truth mask dir (enables metrics)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score predicted masks against gt")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run the synthetic acceptance benches")
    p.add_argument("--quick", action="store_true",
                   help="8-frame sequences instead of 30")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="HTTP service backing the console UI")
    p.add_argument("frames_dir")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

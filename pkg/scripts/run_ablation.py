#!/usr/bin/env python3
"""Run the ablation ladder and warp comparison on the synthetic suite.

Examples:
    python scripts/run_ablation.py --quick
    python scripts/run_ablation.py --frames 30 --workers 2 --json out.json
"""
import argparse
import json
import sys

from rototrack import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--quick", action="store_true", help="8-frame sequences")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--json", help="write raw rows here")
    args = ap.parse_args()
    n = 8 if args.quick else args.frames

    table, rows = bench.ablation_table(n_frames=n, seed=args.seed,
                                       workers=args.workers)
    print(bench.format_ablation(table))
    for row in rows:
        print(f"  {row['sequence']:>12s} {row['preset']:>8s} "
              f"iou {row['mean_iou']:.3f}  {row['mean_ms']:.0f} ms/frame")

    wtable, wrows = bench.warp_comparison(n_frames=n, seed=args.seed,
                                          workers=args.workers)
    print()
    print(bench.format_warp(wtable))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"ablation": table, "warp": wtable}, fh, indent=2)
    ordered = (table["baseline"] <= table["lean"] <= table["medium"]
               <= table["full"])
    return 0 if ordered else 1


if __name__ == "__main__":
    sys.exit(main())

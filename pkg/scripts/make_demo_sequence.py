#!/usr/bin/env python3
"""Write a synthetic sequence to disk for CLI / service demos.

    python scripts/make_demo_sequence.py demo/ --kind fast --frames 30
    rototrack track demo/frames demo/init.json --out demo/run --gt demo/gt
    rototrack serve demo/frames --port 8765
"""
import argparse
import os
import sys

from rototrack.synth import make_sequence, write_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--kind", default="drift",
                    choices=("drift", "fast", "occlude"))
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--frames", type=int, default=30)
    ap.add_argument("--width", type=int, default=240)
    ap.add_argument("--height", type=int, default=180)
    args = ap.parse_args()
    seq = make_sequence(args.kind, args.seed, n_frames=args.frames,
                        size=(args.width, args.height))
    write_sequence(seq,
                   os.path.join(args.out_dir, "frames"),
                   os.path.join(args.out_dir, "gt"),
                   os.path.join(args.out_dir, "init.json"))
    print(f"wrote {args.frames} frames, ground truth, and init curve "
          f"({len(seq.init_curve)} vertices) under {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())

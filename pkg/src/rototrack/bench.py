"""Benchmark runners: the ablation ladder, the warp-mode comparison, the
convergence sweep, and the timing envelope — all on the bundled synthetic
suite. Sequences are regenerated deterministically inside worker processes."""
from __future__ import annotations

import time
from multiprocessing import Pool, cpu_count

import numpy as np

from .pipeline import RunConfig, init_from_keyframe, step, track_sequence
from .synth import N_FRAMES, SIZE, make_sequence

SUITE_SPECS = ([("drift", 100 + i) for i in range(6)]
               + [("fast", 200 + i) for i in range(2)]
               + [("occlude", 300 + i) for i in range(2)])
FAST_SPECS = [("fast", 200 + i) for i in range(2)]
PRESETS = ("baseline", "lean", "medium", "full")


def _run_one(task):
    kind, seq_seed, preset, overrides, run_seed, n_frames, size = task
    seq = make_sequence(kind, seq_seed, n_frames=n_frames, size=size)
    config = RunConfig.from_preset(preset, seed=run_seed, **overrides)
    t0 = time.perf_counter()
    results = track_sequence(seq.frames, seq.init_curve, config,
                             gt_masks=seq.gt_masks)
    wall = time.perf_counter() - t0
    ious = [r.iou for r in results if r.iou is not None]
    return {"sequence": f"{kind}-{seq_seed}", "preset": preset,
            "overrides": overrides, "mean_iou": float(np.mean(ious)),
            "ious": ious, "wall": wall,
            "mean_ms": 1000.0 * float(np.mean([r.wall_time for r in results]))}


def _run_tasks(tasks, workers=None):
    workers = workers if workers is not None else min(cpu_count(), 4)
    if workers <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with Pool(workers) as pool:
        return pool.map(_run_one, tasks)


def ablation_table(n_frames: int = N_FRAMES, size=SIZE, seed: int = 7,
                   workers=None, specs=None):
    """Mean IoU per preset over the synthetic suite. Returns (table, rows)."""
    specs = specs if specs is not None else SUITE_SPECS
    tasks = [(kind, s, preset, {}, seed, n_frames, size)
             for preset in PRESETS for kind, s in specs]
    rows = _run_tasks(tasks, workers)
    table = {}
    for preset in PRESETS:
        sel = [r["mean_iou"] for r in rows if r["preset"] == preset]
        table[preset] = float(np.mean(sel))
    return table, rows


def warp_comparison(n_frames: int = N_FRAMES, size=SIZE, seed: int = 7,
                    workers=None, specs=None):
    """Mean IoU per warp mode on the large-displacement set (medium preset)."""
    specs = specs if specs is not None else FAST_SPECS
    modes = ("rigid_ransac", "node_projection", "none")
    tasks = [(kind, s, "medium", {"warp_mode": mode}, seed, n_frames, size)
             for mode in modes for kind, s in specs]
    rows = _run_tasks(tasks, workers)
    table = {}
    for mode in modes:
        sel = [r["mean_iou"] for r in rows
               if r["overrides"].get("warp_mode") == mode]
        table[mode] = float(np.mean(sel))
    return table, rows


def convergence_sweep(count: int = 20, n_frames: int = 5, size=(160, 120),
                      seed: int = 7):
    """Energy traces from `count` short sequences; returns list of
    (trace, iterations) for every tracked frame."""
    kinds = ["drift", "fast", "occlude"]
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        seq = make_sequence(kind, 400 + i, n_frames=n_frames, size=size)
        config = RunConfig.from_preset("full" if i % 2 else "medium",
                                       seed=seed + i)
        state = init_from_keyframe(seq.frames[0], seq.init_curve, config)
        for k in range(1, n_frames):
            state, res = step(state, seq.frames[k], seq.gt_masks[k])
            out.append((state.last_trace.copy(), res.iterations))
    return out


def timing_envelope(n_frames: int = 12, seed: int = 7):
    """Median per-frame wall time of the baseline preset at 480p."""
    seq = make_sequence("drift", 100, n_frames=n_frames, size=(640, 480))
    config = RunConfig.from_preset("baseline", seed=seed)
    results = track_sequence(seq.frames, seq.init_curve, config,
                             gt_masks=seq.gt_masks)
    times = [r.wall_time for r in results]
    return float(np.median(times)), times


def format_ablation(table: dict) -> str:
    lines = ["preset     mean IoU", "-" * 21]
    for preset in PRESETS:
        lines.append(f"{preset:<10s} {table[preset]:.3f}")
    return "\n".join(lines)


def format_warp(table: dict) -> str:
    lines = ["warp mode        mean IoU", "-" * 26]
    for mode in ("rigid_ransac", "node_projection", "none"):
        lines.append(f"{mode:<16s} {table[mode]:.3f}")
    return "\n".join(lines)

"""Synthetic benchmark scenes: textured deforming blobs with ground truth.

Three families: `drift` (moderate motion and deformation), `fast` (large
per-frame displacement), and `occlude` (a background-colored bar carving a
deep concavity through the object). Frames are quantized to 8 bits so
in-memory sequences match their PNG round trips exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import RegionMask, RotoCurve, rasterize_region, resample_curve
from .imagery import Frame

SIZE = (240, 180)  # (width, height)
N_FRAMES = 30


@dataclass
class SyntheticSequence:
    name: str
    frames: list
    gt_masks: list
    init_curve: RotoCurve


def _noise_field(rng, h, w, smooth):
    f = gaussian_filter(rng.random((h, w)), smooth)
    f -= f.min()
    return f / max(f.max(), 1e-9)


def _iso_luma_color(rng, luma):
    """Random color rescaled to a target BT.601 luminance."""
    for _ in range(50):
        c = rng.uniform(0.1, 1.0, size=3)
        has = float(c @ np.array([0.299, 0.587, 0.114]))
        c = c * (luma / has)
        if c.max() <= 1.0:
            return c
    return np.full(3, luma)


def _blob_polygon(cx, cy, base_r, amps, freqs, phases, n_pts=72):
    theta = np.linspace(0, 2 * np.pi, n_pts, endpoint=False)
    r = base_r * (1.0 + sum(a * np.cos(k * theta + p)
                            for a, k, p in zip(amps, freqs, phases)))
    xs = np.round(cx + r * np.cos(theta)).astype(np.int64)
    ys = np.round(cy + r * np.sin(theta)).astype(np.int64)
    pts = np.stack([xs, ys], axis=1)
    keep = np.any(pts != np.roll(pts, 1, axis=0), axis=1)
    return RotoCurve(pts[keep]).ensure_clockwise()


class _Scene:
    def __init__(self, seed, kind, width, height):
        rng = np.random.default_rng(seed)
        self.kind = kind
        self.width, self.height = width, height
        self.base_r = float(rng.uniform(38, 44)) * min(width, height) / 180.0
        self.amps = rng.uniform(0.04, 0.10, size=2)
        self.freqs = np.array([2, 3])
        self.phases = rng.uniform(0, 2 * np.pi, size=2)
        self.phase_rate = rng.uniform(0.05, 0.12, size=2) * rng.choice([-1, 1], 2)
        margin = self.base_r * 1.35 + 6
        self.margin = margin
        if kind == "fast":
            self.speed = np.array([rng.uniform(12.0, 15.0),
                                   rng.uniform(-3.0, 3.0)])
        elif kind == "drift":
            ang = rng.uniform(0, 2 * np.pi)
            mag = rng.uniform(3.5, 5.0)
            self.speed = mag * np.array([np.cos(ang), np.sin(ang)])
        else:
            self.speed = np.array([rng.uniform(1.0, 2.0), 0.0])
        self.center = np.array([width * 0.5, height * 0.5]) + rng.uniform(
            -12, 12, size=2)
        # object-attached texture, sampled rigidly with the blob center
        pad = 96
        coarse = _noise_field(rng, height + 2 * pad, width + 2 * pad, 2.5)
        fine = _noise_field(rng, height + 2 * pad, width + 2 * pad, 0.9)
        self.fg_noise = 0.8 * coarse + 0.2 * fine
        self.pad = pad
        # fg and bg share nearly the same luminance but differ in chroma:
        # the true boundary is weak for gradients yet crisp for color models
        self.fg_a = _iso_luma_color(rng, 0.55)
        self.fg_b = _iso_luma_color(rng, 0.48)
        # high-contrast interior spots on a jittered ring + center, spaced so
        # the landmark detector can use them all
        ring = []
        for ang in np.linspace(0, 2 * np.pi, 7, endpoint=False):
            r = self.base_r * rng.uniform(0.38, 0.5)
            ring.append([r * np.cos(ang + rng.uniform(-0.2, 0.2)),
                         r * np.sin(ang + rng.uniform(-0.2, 0.2))])
        ring.append(rng.uniform(-4, 4, size=2))
        self.spots = np.array(ring)
        self.spot_dark = rng.random(len(ring)) < 0.5
        # distinct sizes keep correlation filters from confusing the spots
        self.spot_radius = rng.uniform(2.5, 5.5, size=len(ring))
        bg_noise = _noise_field(rng, height, width, 3.0)
        bg_a = _iso_luma_color(rng, 0.52)
        bg_b = _iso_luma_color(rng, 0.45)
        while np.linalg.norm(bg_a - self.fg_a) < 0.25:
            bg_a = _iso_luma_color(rng, 0.52)
        self.bg = bg_a + bg_noise[..., None] * (bg_b - bg_a)
        # static high-luminance-contrast clutter: strong spurious gradients
        for _ in range(8):
            x = int(rng.integers(0, width - 4))
            tone = float(rng.choice([0.06, 0.95]))
            self.bg[:, x:x + 2] = self.bg[:, x:x + 2] * 0.15 + tone * 0.85
        self.bg_mean = self.bg.mean(axis=(0, 1))
        self.occ_width = int(rng.uniform(16, 22))
        self.occ_depth = 0.62  # occluder covers the top fraction of the frame
        self.occ_start = None  # set on first render

    def center_at(self, t):
        c = self.center + self.speed * t
        lo = np.array([self.margin, self.margin])
        hi = np.array([self.width - self.margin, self.height - self.margin])
        span = hi - lo
        # reflect off the walls
        out = np.empty(2)
        for i in range(2):
            period = 2 * span[i]
            v = (c[i] - lo[i]) % period
            out[i] = lo[i] + (v if v <= span[i] else period - v)
        return out

    def polygon_at(self, t):
        cx, cy = self.center_at(t)
        phases = self.phases + self.phase_rate * t
        return _blob_polygon(cx, cy, self.base_r, self.amps, self.freqs,
                             phases)

    def occluder_at(self, t):
        if self.kind != "occlude":
            return None
        cx, _ = self.center_at(t)
        sweep = (t / (N_FRAMES - 1)) * 2.0 - 0.65  # crosses the object mid-shot
        x0 = int(cx + sweep * 2.2 * self.base_r - self.occ_width // 2)
        occ = np.zeros((self.height, self.width), dtype=bool)
        y1 = int(self.height * self.occ_depth)
        occ[:y1, max(x0, 0): max(x0 + self.occ_width, 0)] = True
        return occ

    def render(self, t):
        poly = self.polygon_at(t)
        mask = rasterize_region(poly, self.width, self.height)
        img = self.bg.copy()
        cx, cy = self.center_at(t)
        dx = int(round(cx - self.width * 0.5))
        dy = int(round(cy - self.height * 0.5))
        ys, xs = np.nonzero(mask.inside)
        ty = np.clip(ys - dy + self.pad, 0, self.fg_noise.shape[0] - 1)
        tx = np.clip(xs - dx + self.pad, 0, self.fg_noise.shape[1] - 1)
        tex = self.fg_noise[ty, tx][:, None]
        img[ys, xs] = self.fg_a + tex * (self.fg_b - self.fg_a)
        # landmark-friendly interior spots, attached to the object
        yy, xx = np.mgrid[0: self.height, 0: self.width]
        for k, (ox, oy) in enumerate(self.spots):
            sx, sy = cx + ox, cy + oy
            disc = (xx - sx) ** 2 + (yy - sy) ** 2 <= self.spot_radius[k] ** 2
            disc &= mask.inside
            img[disc] = 0.08 if self.spot_dark[k] else 0.95
        gt = mask.inside
        occ = self.occluder_at(t)
        if occ is not None:
            img[occ] = self.bg_mean
            gt = gt & ~occ
        img = gaussian_filter(img, (0.8, 0.8, 0.0))
        img = np.round(np.clip(img, 0, 1) * 255.0) / 255.0
        gt_mask = RegionMask(np.ascontiguousarray(gt))
        return Frame.from_rgb(img), gt_mask, poly


def make_sequence(kind: str, seed: int, n_frames: int = N_FRAMES,
                  size=SIZE, spacing: float = 10.0) -> SyntheticSequence:
    width, height = size
    scene = _Scene(seed, kind, width, height)
    frames, masks = [], []
    init_curve = None
    for t in range(n_frames):
        frame, gt, poly = scene.render(t)
        frames.append(frame)
        masks.append(gt)
        if t == 0:
            init_curve = resample_curve(poly, spacing)
    return SyntheticSequence(f"{kind}-{seed}", frames, masks, init_curve)


def benchmark_suite(n_frames: int = N_FRAMES, size=SIZE):
    """The bundled 10-sequence benchmark: 6 drift, 2 fast, 2 occluder."""
    out = []
    for i in range(6):
        out.append(make_sequence("drift", 100 + i, n_frames, size))
    for i in range(2):
        out.append(make_sequence("fast", 200 + i, n_frames, size))
    for i in range(2):
        out.append(make_sequence("occlude", 300 + i, n_frames, size))
    return out


def write_sequence(seq: SyntheticSequence, frames_dir, gt_dir=None,
                   curve_path=None) -> None:
    import os

    from PIL import Image

    from .geometry import save_curve_file, save_mask_png

    os.makedirs(frames_dir, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        arr = np.round(frame.rgb * 255.0).astype(np.uint8)
        Image.fromarray(arr).save(os.path.join(frames_dir, f"{i:05d}.png"))
    if gt_dir is not None:
        os.makedirs(gt_dir, exist_ok=True)
        for i, mask in enumerate(seq.gt_masks):
            save_mask_png(os.path.join(gt_dir, f"{i:05d}.png"), mask)
    if curve_path is not None:
        save_curve_file(curve_path, 0, seq.init_curve)

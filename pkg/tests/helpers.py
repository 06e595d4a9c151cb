"""Shared oracles and generators for the test suite.

Everything here is deliberately naive and independent of the library's fast
paths: per-pixel ray casting, brute-force enumerations, direct formula sums.
"""
import numpy as np

from rototrack.geometry import RotoCurve


def point_in_polygon(px: float, py: float, vertices: np.ndarray) -> bool:
    """Even-odd ray cast to the right, half-open vertical rule per edge."""
    inside = False
    n = len(vertices)
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        if ay == by:
            continue
        ylo, yhi = (ay, by) if ay < by else (by, ay)
        if not (ylo <= py < yhi):
            continue
        xc = ax + (py - ay) * (bx - ax) / (by - ay)
        if xc > px:
            inside = not inside
    return inside


def rasterize_oracle(curve: RotoCurve, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    v = curve.vertices
    for j in range(height):
        for i in range(width):
            mask[j, i] = point_in_polygon(i + 0.5, j + 0.5, v)
    return mask


def random_star_polygon(rng: np.random.Generator, width: int, height: int,
                        n_min: int = 3, n_max: int = 24) -> RotoCurve:
    """Random simple polygon: sorted angles around a center, random radii."""
    for _ in range(200):
        n = int(rng.integers(n_min, n_max + 1))
        cx = rng.uniform(width * 0.25, width * 0.75)
        cy = rng.uniform(height * 0.25, height * 0.75)
        rmax = min(cx, cy, width - 1 - cx, height - 1 - cy)
        if rmax < 3:
            continue
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
        if np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 1e-3:
            continue
        radii = rng.uniform(0.2 * rmax, rmax, size=n)
        xs = np.round(cx + radii * np.cos(angles)).astype(np.int64)
        ys = np.round(cy + radii * np.sin(angles)).astype(np.int64)
        verts = np.stack([xs, ys], axis=1)
        if len(np.unique(verts, axis=0)) < n:
            continue
        try:
            curve = RotoCurve(verts)
        except ValueError:
            continue
        if curve.is_simple() and abs(curve.signed_area()) > 4:
            return curve.ensure_clockwise()
    raise RuntimeError("failed to generate a random simple polygon")


def regular_polygon(cx: int, cy: int, radius: int, n: int) -> RotoCurve:
    angles = np.linspace(0, 2 * np.pi, n, endpoint=False)
    xs = np.round(cx + radius * np.cos(angles)).astype(np.int64)
    ys = np.round(cy + radius * np.sin(angles)).astype(np.int64)
    return RotoCurve(np.stack([xs, ys], axis=1)).ensure_clockwise()

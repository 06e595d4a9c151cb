"""Closed polygonal curves: rasterization, edge pixel chains, supports, resampling.

Conventions (shared with the region-integral machinery, which relies on them
being *identical*): pixel (i, j) has center (i + 0.5, j + 0.5); vertices are
integer points; scanlines run at half-integer y so they never hit a vertex.
An edge crosses scanline j + 0.5 iff min(ya, yb) <= j + 0.5 < max(ya, yb),
and the crossing column bookkeeping is done in exact integer arithmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image


class CurveError(ValueError):
    """Raised for degenerate, self-intersecting, or out-of-bounds curves."""


@dataclass(frozen=True)
class RotoCurve:
    """Closed polygon with N integer-coordinate vertices, clockwise by convention."""

    vertices: np.ndarray  # (N, 2) int64, columns (x, y)

    def __post_init__(self):
        v = np.asarray(self.vertices)
        if v.ndim != 2 or v.shape[1] != 2:
            raise CurveError(f"vertices must be (N, 2), got {v.shape}")
        if v.shape[0] < 3:
            raise CurveError(f"need at least 3 vertices, got {v.shape[0]}")
        if not np.issubdtype(v.dtype, np.integer):
            if not np.all(v == np.round(v)):
                raise CurveError("vertex coordinates must be integers")
        object.__setattr__(self, "vertices", _frozen(v.astype(np.int64)))

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def edge(self, n: int):
        """Edge n = (x_n, x_{n+1}), wrapping so edge N-1 closes the curve."""
        v = self.vertices
        return v[n], v[(n + 1) % len(self)]

    def signed_area(self) -> float:
        """Shoelace area; positive = clockwise on screen (image coords, y down)."""
        v = self.vertices.astype(np.float64)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def is_clockwise(self) -> bool:
        return self.signed_area() > 0

    def reversed(self) -> "RotoCurve":
        return RotoCurve(self.vertices[::-1].copy())

    def ensure_clockwise(self) -> "RotoCurve":
        return self if self.is_clockwise() else self.reversed()

    def perimeter(self) -> float:
        v = self.vertices.astype(np.float64)
        d = np.roll(v, -1, axis=0) - v
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    def translated(self, dx: int, dy: int) -> "RotoCurve":
        return RotoCurve(self.vertices + np.array([dx, dy]))

    def in_bounds(self, width: int, height: int) -> bool:
        v = self.vertices
        return bool(
            np.all(v[:, 0] >= 0) and np.all(v[:, 0] <= width - 1)
            and np.all(v[:, 1] >= 0) and np.all(v[:, 1] <= height - 1)
        )

    def is_simple(self) -> bool:
        """No repeated consecutive vertices, no edge pair intersecting off shared ends."""
        v = self.vertices.astype(np.int64)
        n = len(self)
        a = v
        b = np.roll(v, -1, axis=0)
        if np.any(np.all(a == b, axis=1)):
            return False  # zero-length edge

        def orient(p, q, r):
            """Sign of (q-p) x (r-p) for broadcastable point arrays."""
            return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                           - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

        def on_seg(p, q, r):
            """r within bounding box of pq (use only where collinear)."""
            return ((np.minimum(p[..., 0], q[..., 0]) <= r[..., 0])
                    & (r[..., 0] <= np.maximum(p[..., 0], q[..., 0]))
                    & (np.minimum(p[..., 1], q[..., 1]) <= r[..., 1])
                    & (r[..., 1] <= np.maximum(p[..., 1], q[..., 1])))

        ai, bi = a[:, None, :], b[:, None, :]
        aj, bj = a[None, :, :], b[None, :, :]
        o1 = orient(ai, bi, aj)
        o2 = orient(ai, bi, bj)
        o3 = orient(aj, bj, ai)
        o4 = orient(aj, bj, bi)
        hit = (o1 != o2) & (o3 != o4)
        hit |= (o1 == 0) & on_seg(ai, bi, aj)
        hit |= (o2 == 0) & on_seg(ai, bi, bj)
        hit |= (o3 == 0) & on_seg(aj, bj, ai)
        hit |= (o4 == 0) & on_seg(aj, bj, bi)
        idx = np.arange(n)
        off = (idx[None, :] - idx[:, None]) % n
        nonadjacent = (off != 0) & (off != 1) & (off != n - 1)
        if np.any(hit & nonadjacent):
            return False
        # consecutive edges share b[i] == a[i+1]; a doubled-back (spike) or
        # collinear-overlap contact beyond the shared vertex is not simple
        nxt = (idx + 1) % n
        collinear = orient(a, b, b[nxt]) == 0
        back = ((a[:, 0] - b[:, 0]) * (b[nxt][:, 0] - b[:, 0])
                + (a[:, 1] - b[:, 1]) * (b[nxt][:, 1] - b[:, 1])) > 0
        return not np.any(collinear & back)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _orient(p, q, r) -> int:
    """Sign of the cross product (q-p) x (r-p); exact on int64 inputs."""
    val = int(q[0] - p[0]) * int(r[1] - p[1]) - int(q[1] - p[1]) * int(r[0] - p[0])
    return (val > 0) - (val < 0)


def _on_segment(p, q, r) -> bool:
    """r collinear with pq: is r within the bounding box of pq?"""
    return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
            and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))


def _segments_intersect(p1, q1, p2, q2) -> bool:
    o1 = _orient(p1, q1, p2)
    o2 = _orient(p1, q1, q2)
    o3 = _orient(p2, q2, p1)
    o4 = _orient(p2, q2, q1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, q1, p2):
        return True
    if o2 == 0 and _on_segment(p1, q1, q2):
        return True
    if o3 == 0 and _on_segment(p2, q2, p1):
        return True
    if o4 == 0 and _on_segment(p2, q2, q1):
        return True
    return False


def _segments_touch_beyond_shared(p1, q1, p2, q2) -> bool:
    """For edges sharing exactly one endpoint: any contact besides that point?"""
    shared = None
    ends1 = [tuple(p1), tuple(q1)]
    for e in (tuple(p2), tuple(q2)):
        if e in ends1:
            shared = e
    if shared is None:
        return _segments_intersect(p1, q1, p2, q2)
    # spike / collinear overlap: the non-shared endpoint of one lies on the other
    other2 = tuple(q2) if tuple(p2) == shared else tuple(p2)
    other1 = tuple(q1) if tuple(p1) == shared else tuple(p1)
    if _orient(p1, q1, other2) == 0 and _on_segment(p1, q1, other2):
        return True
    if _orient(p2, q2, other1) == 0 and _on_segment(p2, q2, other1):
        return True
    return False


def crossing_col(ax: int, ay: int, bx: int, by: int, row: int) -> int:
    """Column of the last pixel center strictly left of (or at) the exact crossing.

    For edge (a, b) with ay != by crossing scanline y = row + 0.5, returns
    K = ceil(x_c - 0.5) - 1 in exact integer arithmetic, where x_c is the
    crossing abscissa. Fill and cost bookkeeping both derive from K: an
    entering crossing starts filling at K + 1, an exiting one stops at K.
    """
    dx = bx - ax
    dy = by - ay
    num = (2 * (row - ay) + 1) * dx - dy
    den = 2 * dy
    if den < 0:
        num, den = -num, -den
    return ax + (-((-num) // den)) - 1


@dataclass(frozen=True)
class RegionMask:
    """Boolean inside/outside plane produced by the scanline rasterizer."""

    inside: np.ndarray  # (H, W) bool

    @property
    def width(self) -> int:
        return self.inside.shape[1]

    @property
    def height(self) -> int:
        return self.inside.shape[0]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.inside))


def rasterize_region(curve: RotoCurve, width: int, height: int) -> RegionMask:
    """Pixels whose centers fall inside the polygon (even-odd, half-open scanlines).

    Vertices live on the pixel-corner lattice [0, width] x [0, height]; a
    boundary traced around border-flush pixels is still rasterizable.
    """
    v = curve.vertices
    if (v[:, 0].min() < 0 or v[:, 0].max() > width
            or v[:, 1].min() < 0 or v[:, 1].max() > height):
        raise CurveError("curve out of image bounds")
    if not curve.is_simple():
        raise CurveError("self-intersecting curve")
    if curve.signed_area() == 0:
        raise CurveError("degenerate (zero-area) curve")
    v = curve.vertices
    n = len(curve)
    rows: list = [[] for _ in range(height)]
    for i in range(n):
        ax, ay = int(v[i, 0]), int(v[i, 1])
        bx, by = int(v[(i + 1) % n, 0]), int(v[(i + 1) % n, 1])
        if ay == by:
            continue
        ylo, yhi = (ay, by) if ay < by else (by, ay)
        for row in range(max(ylo, 0), min(yhi, height)):
            rows[row].append(crossing_col(ax, ay, bx, by, row))
    inside = np.zeros((height, width), dtype=bool)
    for row, ks in enumerate(rows):
        if not ks:
            continue
        ks.sort()
        for e in range(0, len(ks) - 1, 2):
            lo = max(ks[e] + 1, 0)
            hi = min(ks[e + 1], width - 1)
            if lo <= hi:
                inside[row, lo:hi + 1] = True
    return RegionMask(_frozen(inside))


def edge_pixel_chain(a, b) -> np.ndarray:
    """Discretization of segment [a, b], ordered from a, final vertex excluded.

    Walks the major axis; the minor coordinate is the rounded ideal line, so
    the pixel set is identical for the reversed edge (up to endpoints).
    """
    ax, ay = int(a[0]), int(a[1])
    bx, by = int(b[0]), int(b[1])
    dx, dy = bx - ax, by - ay
    if dx == 0 and dy == 0:
        raise CurveError("identical endpoints")
    steps = max(abs(dx), abs(dy))
    t = np.arange(steps)
    if abs(dx) >= abs(dy):
        xs = ax + t * np.sign(dx)
        ys = np.floor(ay + (xs - ax) * (dy / dx) + 0.5).astype(np.int64)
    else:
        ys = ay + t * np.sign(dy)
        xs = np.floor(ax + (ys - ay) * (dx / dy) + 0.5).astype(np.int64)
    return np.stack([xs.astype(np.int64), ys.astype(np.int64)], axis=1)


@dataclass(frozen=True)
class EdgeSupport:
    """Rectangle straddling edge n, split by mask membership."""

    edge_index: int
    inside_pixels: np.ndarray   # (K, 2) int64 pixel indices (x, y)
    outside_pixels: np.ndarray  # (K', 2)
    width_w: float


def edge_support(curve: RotoCurve, n: int, mask: RegionMask, w: float) -> EdgeSupport:
    """Pixels with centers within perpendicular distance w and axial extent of edge n."""
    if w <= 0:
        raise ValueError(f"support half-width must be positive, got {w}")
    a, b = curve.edge(n)
    sel = support_pixels(a, b, w, mask.width, mask.height)
    if sel.shape[0] == 0:
        return EdgeSupport(n, sel, sel, w)
    member = mask.inside[sel[:, 1], sel[:, 0]]
    return EdgeSupport(n, sel[member], sel[~member], w)


def support_pixels(a, b, w: float, width: int, height: int) -> np.ndarray:
    """All in-bounds pixels in the w-rectangle around segment [a, b]."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    dx, dy = bx - ax, by - ay
    length = float(np.hypot(dx, dy))
    if length == 0:
        raise CurveError("identical endpoints")
    margin = w + 1.0
    x0 = max(int(np.floor(min(ax, bx) - margin)), 0)
    x1 = min(int(np.ceil(max(ax, bx) + margin)), width - 1)
    y0 = max(int(np.floor(min(ay, by) - margin)), 0)
    y1 = min(int(np.ceil(max(ay, by) + margin)), height - 1)
    if x1 < x0 or y1 < y0:
        return np.empty((0, 2), dtype=np.int64)
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    cx = xs + 0.5 - ax
    cy = ys + 0.5 - ay
    d2 = dx * dx + dy * dy
    t = (cx * dx + cy * dy) / d2
    cross = dx * cy - dy * cx
    keep = (t >= 0.0) & (t <= 1.0) & (cross * cross <= w * w * d2)
    return np.stack([xs[keep].astype(np.int64), ys[keep].astype(np.int64)], axis=1)


def resample_curve(curve: RotoCurve, target_spacing: float) -> RotoCurve:
    """Redistribute vertices at uniform arc length along the polygon."""
    perim = curve.perimeter()
    if target_spacing > perim / 3.0:
        raise CurveError(
            f"spacing {target_spacing} too coarse for perimeter {perim:.1f}")
    count = max(3, int(round(perim / target_spacing)))
    v = curve.vertices.astype(np.float64)
    closed = np.vstack([v, v[:1]])
    seg = np.diff(closed, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    targets = np.arange(count) * (perim / count)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seglen) - 1)
    frac = (targets - cum[idx]) / np.where(seglen[idx] > 0, seglen[idx], 1.0)
    pts = closed[idx] + seg[idx] * frac[:, None]
    out = np.round(pts).astype(np.int64)
    # integer rounding can produce repeated vertices; drop them
    keep = np.ones(len(out), dtype=bool)
    for i in range(len(out)):
        if np.array_equal(out[i], out[(i + 1) % len(out)]):
            keep[(i + 1) % len(out)] = False
    out = out[keep]
    if len(out) < 3:
        raise CurveError("resampling collapsed the curve")
    resampled = RotoCurve(out)
    if not resampled.is_simple():
        raise CurveError("resampling produced a self-intersecting curve")
    return resampled


def curve_doc(frame_index: int, curve: RotoCurve) -> dict:
    return {"frame_index": int(frame_index),
            "vertices": [[int(x), int(y)] for x, y in curve.vertices]}


def curve_doc_string(frame_index: int, curve: RotoCurve) -> str:
    """Canonical serialization; the CLI and the service emit identical bytes."""
    return json.dumps(curve_doc(frame_index, curve),
                      separators=(",", ":")) + "\n"


def save_curve_file(path, frame_index: int, curve: RotoCurve) -> None:
    with open(path, "w") as fh:
        fh.write(curve_doc_string(frame_index, curve))


def load_curve_file(path):
    """Returns (frame_index, RotoCurve); raises CurveError on malformed docs."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        frame_index = int(doc["frame_index"])
        verts = np.array(doc["vertices"], dtype=np.int64)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CurveError(f"malformed curve file {path}: {exc}") from exc
    return frame_index, RotoCurve(verts)


def save_mask_png(path, mask: RegionMask) -> None:
    img = Image.fromarray(np.where(mask.inside, 255, 0).astype(np.uint8), mode="L")
    img.save(path)


def load_mask_png(path) -> RegionMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return RegionMask(_frozen(arr >= 128))

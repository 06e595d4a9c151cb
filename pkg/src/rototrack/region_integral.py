"""Exact conversion of global-model region sums into per-edge contour costs.

The identity: for a clockwise simple polygon, summing the signed row-prefix
values at every scanline crossing of every edge equals the sum of the raw
plane over the rasterized interior. Exactness comes from deriving the
crossing column with the same half-open scanline rule (geometry.crossing_col)
the rasterizer uses: a downward edge closes each row interval it crosses
(+Q at the last inside column), an upward edge opens it (-Q at the column
just before the first inside one), horizontal edges contribute nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .appearance import FgBgModel, log_density_many
from .geometry import RotoCurve, crossing_col
from .imagery import Frame, RowPrefixPlane, row_prefix


@dataclass(frozen=True)
class GreenField:
    """Row-prefix of the per-pixel log ratio ln(p0_bg / p0_fg)."""

    q_plane: RowPrefixPlane

    @property
    def width(self) -> int:
        return self.q_plane.width

    @property
    def height(self) -> int:
        return self.q_plane.height

    @staticmethod
    def from_plane(log_ratio: np.ndarray) -> "GreenField":
        return GreenField(row_prefix(log_ratio))


def build_green_field(frame: Frame, global_model: FgBgModel) -> GreenField:
    flat = frame.rgb.reshape(-1, 3)
    ratio = log_density_many(global_model.bg, flat) - log_density_many(
        global_model.fg, flat)
    return GreenField.from_plane(ratio.reshape(frame.height, frame.width))


def edge_crossings(ax: int, ay: int, bx: int, by: int, height: int):
    """(rows, cols, sign) of an edge's scanline crossings; sign +1 downward."""
    if ay == by:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), 0)
    sign = 1 if by > ay else -1
    ylo, yhi = (ay, by) if ay < by else (by, ay)
    rows = np.arange(max(ylo, 0), min(yhi, height), dtype=np.int64)
    cols = np.array([crossing_col(ax, ay, bx, by, int(r)) for r in rows],
                    dtype=np.int64)
    return rows, cols, sign


def global_edge_cost(field: GreenField, curve: RotoCurve, n: int) -> float:
    """Signed sum of Q over edge n's scanline crossings."""
    a, b = curve.edge(n)
    ax, ay, bx, by = int(a[0]), int(a[1]), int(b[0]), int(b[1])
    if not (0 <= min(ax, bx) and max(ax, bx) <= field.width
            and 0 <= min(ay, by) and max(ay, by) <= field.height):
        raise ValueError(f"edge {n} out of field bounds")
    rows, cols, sign = edge_crossings(ax, ay, bx, by, field.height)
    if sign == 0:
        return 0.0
    q = field.q_plane.values
    valid = cols >= 0  # crossings at the left border index Q(-1) == 0
    return float(sign * np.sum(q[rows[valid], cols[valid]]))


def total_contour_cost(field: GreenField, curve: RotoCurve) -> float:
    """Sum of per-edge costs; equals the interior region sum for clockwise curves."""
    return float(sum(global_edge_cost(field, curve, n) for n in range(len(curve))))

"""Joint curve+landmark energy and its exact alternating block minimization.

The contour step is a cyclic Viterbi over per-vertex move windows; every
term it optimizes is edge- or vertex-separable and is evaluated through the
same kernels `total_energy` uses, so each block step can only lower the total.
Edge-cost geometry (pixel chains, support rectangles, scanline crossings)
depends only on the edge's displacement vector and is cached per delta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .appearance import FgBgModel, log_density_many
from .geometry import RotoCurve, crossing_col
from .imagery import Frame
from .landmarks import CostMap, LandmarkPool

SUPPORT_HALF_WIDTH = 10.0
DEFAULT_MOVE_RADIUS = 2
DEFAULT_MAX_ITERS = 10
ROOT_RADIUS = 8


@dataclass(frozen=True)
class Weights:
    """Energy term weights; the w_* toggles drive the ablation presets."""

    mu: float = 0.05
    lam: float = 1.0
    w_loc: float = 1.0
    w_glob: float = 1.0
    w_land: float = 1.0
    w_joint: float = 1.0
    stretch_mode: str = "verbatim"  # chain-length * mu * |e|^2, as printed

    def stretch_cost(self, dx: int, dy: int) -> float:
        len2 = float(dx * dx + dy * dy)
        if self.stretch_mode == "pure_l2":
            return self.mu * len2
        return self.mu * max(abs(dx), abs(dy)) * len2


@dataclass(frozen=True)
class MoveWindow:
    """The (2r+1)^2 integer vertex offsets considered per node, zero included."""

    radius: int

    @property
    def moves(self) -> np.ndarray:
        r = self.radius
        side = np.arange(-r, r + 1)
        out = np.array([(dx, dy) for dx in side for dy in side], dtype=np.int64)
        return out  # lexicographic in (dx, dy); index of zero = middle

    @property
    def count(self) -> int:
        return (2 * self.radius + 1) ** 2

    @property
    def zero_index(self) -> int:
        return (self.count - 1) // 2


@dataclass
class EnergyBreakdown:
    e_curve: float
    e_land: float
    e_joint: float
    total: float
    per_edge_loc: np.ndarray
    per_edge_glob: np.ndarray

    def to_dict(self) -> dict:
        return {"e_curve": self.e_curve, "e_land": self.e_land,
                "e_joint": self.e_joint, "total": self.total}


class DeltaGeometry:
    """Per-displacement pixel geometry, shared across all edges and frames."""

    def __init__(self, support_half_width: float = SUPPORT_HALF_WIDTH,
                 flat_cache_size: int = 512):
        self.w = float(support_half_width)
        self._cache: dict = {}
        self._flat: dict = {}  # (base_dx, base_dy, radius) -> flat tables, LRU
        self._flat_cap = flat_cache_size

    def get(self, dx: int, dy: int) -> dict:
        key = (dx, dy)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        entry = self._build(dx, dy)
        self._cache[key] = entry
        return entry

    def get_flat(self, base_dx: int, base_dy: int, window: "MoveWindow") -> dict:
        """All (D x D) move-pair geometries of one edge, flattened for bincount.

        Rows carry (start-move + support offset) positions tagged with the
        linear pair id; degenerate pairs (edge collapsing to a point) are
        absent and stay at +inf in the assembled table.
        """
        key = (base_dx, base_dy, window.radius)
        hit = self._flat.get(key)
        if hit is not None:
            self._flat[key] = self._flat.pop(key)  # refresh LRU order
            return hit
        moves = window.moves
        D = window.count
        groups = move_groups(window)
        in_pos, in_seg = [], []
        out_pos, out_seg = [], []
        ch_pos, ch_seg = [], []
        cr_pos, cr_seg, cr_sign = [], [], []
        stretch_len = np.zeros(D * D, dtype=np.float64)
        len2 = np.zeros(D * D, dtype=np.float64)
        live = np.zeros(D * D, dtype=bool)
        for (ddx, ddy), (ii, jj) in groups.items():
            dx, dy = base_dx + ddx, base_dy + ddy
            if dx == 0 and dy == 0:
                continue
            pair_ids = ii * D + jj
            live[pair_ids] = True
            stretch_len[pair_ids] = max(abs(dx), abs(dy))
            len2[pair_ids] = dx * dx + dy * dy
            g = self.get(dx, dy)
            starts = moves[ii]  # (B, 2) offsets of the edge start
            for off, pos_list, seg_list in (
                    (g["chain"], ch_pos, ch_seg),
                    (g["in"], in_pos, in_seg),
                    (g["out"], out_pos, out_seg)):
                k = off.shape[0]
                if k == 0:
                    continue
                p = (starts[:, None, :] + off[None, :, :]).reshape(-1, 2)
                pos_list.append(p)
                seg_list.append(np.repeat(pair_ids, k))
            k = g["rows"].shape[0]
            if k:
                p = np.empty((len(ii), k, 2), dtype=np.int64)
                p[:, :, 0] = starts[:, 0, None] + g["cols"][None, :]
                p[:, :, 1] = starts[:, 1, None] + g["rows"][None, :]
                cr_pos.append(p.reshape(-1, 2))
                cr_seg.append(np.repeat(pair_ids, k))
                cr_sign.append(np.full(len(ii) * k, g["sign"], dtype=np.int8))

        def pack(pos_list, seg_list):
            if not pos_list:
                return (np.empty((0, 2), dtype=np.int32),
                        np.empty(0, dtype=np.int32))
            return (np.concatenate(pos_list).astype(np.int32),
                    np.concatenate(seg_list).astype(np.int32))

        entry = {
            "in": pack(in_pos, in_seg), "out": pack(out_pos, out_seg),
            "chain": pack(ch_pos, ch_seg), "cross": pack(cr_pos, cr_seg),
            "cross_sign": (np.concatenate(cr_sign) if cr_sign
                           else np.empty(0, dtype=np.int8)),
            "stretch_len": stretch_len, "len2": len2, "live": live,
        }
        self._flat[key] = entry
        if len(self._flat) > self._flat_cap:
            self._flat.pop(next(iter(self._flat)))
        return entry

    def _build(self, dx: int, dy: int) -> dict:
        # chain offsets (start vertex at origin, end vertex excluded)
        steps = max(abs(dx), abs(dy))
        t = np.arange(steps)
        if abs(dx) >= abs(dy):
            xs = t * np.sign(dx)
            ys = np.floor((xs * (dy / dx)) + 0.5).astype(np.int64) if dx else t * 0
        else:
            ys = t * np.sign(dy)
            xs = np.floor((ys * (dx / dy)) + 0.5).astype(np.int64)
        chain = np.stack([xs.astype(np.int64), ys.astype(np.int64)], axis=1)
        # support rectangle offsets, split by side of the directed edge
        w = self.w
        m = int(np.ceil(w)) + 1
        gx = np.arange(min(0, dx) - m, max(0, dx) + m + 1)
        gy = np.arange(min(0, dy) - m, max(0, dy) + m + 1)
        ox, oy = np.meshgrid(gx, gy)
        cx = ox + 0.5
        cy = oy + 0.5
        length2 = float(dx * dx + dy * dy)
        tpar = (cx * dx + cy * dy) / length2
        cross = dx * cy - dy * cx
        # |perp| <= w tested as cross^2 <= w^2 * |d|^2: no sqrt rounding
        band = (tpar >= 0.0) & (tpar <= 1.0) & (cross * cross <= w * w * length2)
        inside = band & (cross > 0)   # interior right of edge, clockwise curves
        outside = band & (cross < 0)
        in_off = np.stack([ox[inside], oy[inside]], axis=1).astype(np.int64)
        out_off = np.stack([ox[outside], oy[outside]], axis=1).astype(np.int64)
        # scanline crossings (row offset, Q-column offset, sign)
        if dy == 0:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
            sign = 0
        else:
            sign = 1 if dy > 0 else -1
            lo, hi = (0, dy) if dy > 0 else (dy, 0)
            rows = np.arange(lo, hi, dtype=np.int64)
            cols = np.array([crossing_col(0, 0, dx, dy, int(r)) for r in rows],
                            dtype=np.int64)
        return {"chain": chain, "in": in_off, "out": out_off,
                "rows": rows, "cols": cols, "sign": sign}


def _seg_plane_sum(plane: np.ndarray, base, pos: np.ndarray, seg: np.ndarray,
                   n_segments: int, sign=None) -> np.ndarray:
    """Per-segment sums of plane values at base + pos; out-of-plane adds 0."""
    h, w = plane.shape
    x = pos[:, 0].astype(np.int64) + base[0]
    y = pos[:, 1].astype(np.int64) + base[1]
    valid = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    flat = (y * w + x) * valid
    vals = plane.ravel().take(flat)
    vals = vals * valid
    if sign is not None:
        vals = vals * sign
    return np.bincount(seg, weights=vals, minlength=n_segments)


def _window_sum(plane: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Sum plane values at (B, K, 2) integer positions; out-of-plane adds 0."""
    h, w = plane.shape
    x = pos[..., 0]
    y = pos[..., 1]
    valid = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    flat = (y * w + x) * valid  # out-of-plane indices collapse to 0
    vals = plane.ravel().take(flat)
    vals *= valid
    return vals.sum(axis=-1)


class ContourCosts:
    """Edge-cost evaluator for one frame/curve/model configuration.

    Hosts the local color-cost windows per edge and answers both single-pair
    evaluations (for reporting) and batched (D x D) pair tables (for the DP)
    through the same arithmetic.
    """

    def __init__(self, frame: Frame, curve: RotoCurve, local_models,
                 green_field, weights: Weights, geom: DeltaGeometry,
                 move_radius: int = 0):
        if local_models is not None and len(local_models) != len(curve):
            raise ValueError("one local model per edge required")
        self.frame = frame
        self.curve = curve
        self.weights = weights
        self.geom = geom
        self.green = green_field
        n = len(curve)
        self._windows = [None] * n
        if weights.w_loc != 0.0 and local_models is not None:
            margin = int(np.ceil(geom.w)) + move_radius + 2
            for i in range(n):
                a, b = curve.edge(i)
                x0 = max(int(min(a[0], b[0])) - margin, 0)
                x1 = min(int(max(a[0], b[0])) + margin + 1, frame.width)
                y0 = max(int(min(a[1], b[1])) - margin, 0)
                y1 = min(int(max(a[1], b[1])) + margin + 1, frame.height)
                rgb = frame.rgb[y0:y1, x0:x1].reshape(-1, 3)
                model: FgBgModel = local_models[i]
                cost_f = -log_density_many(model.fg, rgb).reshape(
                    y1 - y0, x1 - x0)
                cost_b = -log_density_many(model.bg, rgb).reshape(
                    y1 - y0, x1 - x0)
                self._windows[i] = (x0, y0, cost_f, cost_b)

    def pair_table(self, n: int, window: "MoveWindow") -> np.ndarray:
        """(D, D) cost of edge n for every (start move, end move) pair."""
        a, b = self.curve.edge(n)
        base = (int(a[0]), int(a[1]))
        flat = self.geom.get_flat(int(b[0] - a[0]), int(b[1] - a[1]), window)
        w = self.weights
        P = window.count ** 2
        if w.stretch_mode == "pure_l2":
            loc = w.mu * flat["len2"].copy()
        else:
            loc = w.mu * flat["stretch_len"] * flat["len2"]
        pos, seg = flat["chain"]
        if pos.size:
            loc -= w.lam * _seg_plane_sum(self.frame.grad_sq, base, pos, seg, P)
        if w.w_loc != 0.0 and self._windows[n] is not None:
            x0, y0, cost_f, cost_b = self._windows[n]
            shifted = (base[0] - x0, base[1] - y0)
            pos, seg = flat["in"]
            color = _seg_plane_sum(cost_f, shifted, pos, seg, P)
            pos, seg = flat["out"]
            color += _seg_plane_sum(cost_b, shifted, pos, seg, P)
            loc += w.w_loc * color
        if w.w_glob != 0.0 and self.green is not None:
            pos, seg = flat["cross"]
            if pos.size:
                loc += w.w_glob * _seg_plane_sum(
                    self.green.q_plane.values, base, pos, seg, P,
                    sign=flat["cross_sign"])
        loc[~flat["live"]] = np.inf
        return loc.reshape(window.count, window.count)

    def pair_costs(self, n: int, starts: np.ndarray, dx: int, dy: int):
        """Edge-n costs for a batch of start positions sharing one displacement.

        Returns (loc (B,), glob (B,)) or None for a degenerate zero delta.
        """
        if dx == 0 and dy == 0:
            return None
        g = self.geom.get(dx, dy)
        w = self.weights
        B = starts.shape[0]
        loc = np.full(B, w.stretch_cost(dx, dy))
        if g["chain"].shape[0]:
            pos = starts[:, None, :] + g["chain"][None, :, :]
            loc = loc - w.lam * _window_sum(self.frame.grad_sq, pos)
        if w.w_loc != 0.0 and self._windows[n] is not None:
            x0, y0, cost_f, cost_b = self._windows[n]
            off = np.array([x0, y0], dtype=np.int64)
            pin = starts[:, None, :] + g["in"][None, :, :] - off
            pout = starts[:, None, :] + g["out"][None, :, :] - off
            loc = loc + w.w_loc * (_window_sum(cost_f, pin)
                                   + _window_sum(cost_b, pout))
        glob = np.zeros(B)
        if w.w_glob != 0.0 and self.green is not None and g["sign"] != 0:
            q = self.green.q_plane.values
            rows = starts[:, None, 1] + g["rows"][None, :]
            cols = starts[:, None, 0] + g["cols"][None, :]
            valid = cols >= 0
            vals = q[np.clip(rows, 0, q.shape[0] - 1),
                     np.clip(cols, 0, q.shape[1] - 1)]
            glob = w.w_glob * g["sign"] * np.where(valid, vals, 0.0).sum(axis=1)
        return loc, glob

    def edge_cost(self, n: int):
        """(psi_loc, psi_glob) of edge n as currently placed."""
        a, b = self.curve.edge(n)
        out = self.pair_costs(n, a[None, :], int(b[0] - a[0]), int(b[1] - a[1]))
        if out is None:
            raise ValueError(f"edge {n} has identical endpoints")
        loc, glob = out
        return float(loc[0]), float(glob[0])


def local_edge_energy(frame: Frame, curve: RotoCurve, n: int,
                      model: FgBgModel, weights: Weights,
                      support_half_width: float = SUPPORT_HALF_WIDTH) -> float:
    """psi_loc of edge n alone: color halves, stretch, and gradient terms."""
    geom = DeltaGeometry(support_half_width)
    models = [model] * len(curve)
    costs = ContourCosts(frame, curve, models, None, weights, geom)
    loc, _ = costs.edge_cost(n)
    return loc


def landmark_unary(cmap: CostMap, position, pairings, curve: RotoCurve,
                   weights: Weights):
    """w_land*phi + w_joint*xi over the cost-map grid (or just the fixed point)."""
    h, wd = cmap.phi.shape
    xs = cmap.origin[0] + np.arange(wd)
    ys = cmap.origin[1] + np.arange(h)
    u = weights.w_land * cmap.phi.copy()
    if weights.w_joint != 0.0:
        for nidx, mu in pairings:
            tx = float(curve.vertices[nidx][0]) - mu[0]
            ty = float(curve.vertices[nidx][1]) - mu[1]
            u = u + weights.w_joint * 0.5 * (
                (xs[None, :] - tx) ** 2 + (ys[:, None] - ty) ** 2)
    return u


def gdt_quadratic(costs: np.ndarray, a: float = 0.5):
    """out[y] = min_x costs[x] + a*||x - y||^2, with argmin maps.

    Separable: a row pass then a column pass of exact 1-D minimizations.
    Returns (out, argy, argx) where (argy, argx) index the minimizing cell.
    """
    costs = np.asarray(costs, dtype=np.float64)
    h, w = costs.shape
    qx = np.arange(w)
    quad_x = a * (qx[:, None] - qx[None, :]) ** 2  # (x_out, x_in)
    tmp = costs[:, None, :] + quad_x[None, :, :]   # (y, x_out, x_in)
    argx_rows = np.argmin(tmp, axis=2)             # (y, x_out)
    rows = np.min(tmp, axis=2)
    qy = np.arange(h)
    quad_y = a * (qy[:, None] - qy[None, :]) ** 2  # (y_out, y_in)
    tmp2 = rows.T[:, None, :] + quad_y[None, :, :]  # (x_out, y_out, y_in)
    argy = np.argmin(tmp2, axis=2).T               # (y_out, x_out)
    out = np.min(tmp2, axis=2).T
    argx = argx_rows[argy, np.arange(w)[None, :]]
    return out, argy, argx


@dataclass
class LandmarkStep:
    """Result of one landmark block step."""

    positions: dict        # landmark id -> (2,) int64
    root: np.ndarray       # inferred root position (float)
    moved: bool
    flag_empty: bool = False


def infer_landmarks(pool: LandmarkPool, cost_maps: dict, curve: RotoCurve,
                    weights: Weights, root_radius: int = ROOT_RADIUS,
                    ) -> LandmarkStep:
    """Exact minimizer of the landmark block given a fixed contour.

    Root offsets Delta range over a square window around the previous root;
    landmark m's message is the quadratic distance transform of its unary,
    sampled at prev_position_m + Delta (on-grid by construction).
    """
    if len(pool) == 0:
        return LandmarkStep({}, pool.prev_root, False, flag_empty=True)
    if weights.w_land == 0.0 and weights.w_joint == 0.0:
        return LandmarkStep({lm.id: lm.position.copy() for lm in pool.landmarks},
                            pool.prev_root, False)
    unaries = {}
    for lm in pool.landmarks:
        cmap = cost_maps.get(lm.id)
        if cmap is None or cmap.phi.size == 0:
            unaries[lm.id] = None
        else:
            unaries[lm.id] = (cmap, landmark_unary(
                cmap, lm.position, lm.pairings, curve, weights))
    if weights.w_land == 0.0:
        # no matching term and no root springs: minimize each xi sum alone
        positions = {}
        for lm in pool.landmarks:
            if unaries[lm.id] is None:
                positions[lm.id] = lm.position.copy()
                continue
            cmap, u = unaries[lm.id]
            iy, ix = np.unravel_index(int(np.argmin(u)), u.shape)
            positions[lm.id] = cmap.origin + np.array([ix, iy], dtype=np.int64)
        return LandmarkStep(positions, pool.prev_root, True)
    a = 0.5 * weights.w_land
    side = range(-root_radius, root_radius + 1)
    # zero offset first so flat objectives do not drift the pool
    deltas = np.array(sorted(((dx, dy) for dx in side for dy in side),
                             key=lambda d: (max(abs(d[0]), abs(d[1])), d)),
                      dtype=np.int64).reshape(-1, 2)
    prev_root = pool.prev_root
    total = np.zeros(len(deltas))
    recover = []
    for lm in pool.landmarks:
        entry = unaries[lm.id]
        if entry is None:
            # frozen landmark: pairwise cost to the root is still Delta-dependent
            d = lm.position.astype(float) - lm.prev_position.astype(float)
            rel = d[None, :] - deltas.astype(float)
            total = total + a * np.sum(rel * rel, axis=1)
            recover.append((lm, None, None, None, None))
            continue
        cmap, u = entry
        gdt, argy, argx = gdt_quadratic(u, a)
        qpos = lm.prev_position[None, :] + deltas  # query = prev + Delta
        qx = qpos[:, 0] - cmap.origin[0]
        qy = qpos[:, 1] - cmap.origin[1]
        ok = (qx >= 0) & (qx < gdt.shape[1]) & (qy >= 0) & (qy < gdt.shape[0])
        vals = np.full(len(deltas), np.inf)
        vals[ok] = gdt[qy[ok], qx[ok]]
        total = total + vals
        recover.append((lm, cmap, argy, argx, (qx, qy, ok)))
    best = int(np.argmin(total))
    if not np.isfinite(total[best]):
        return LandmarkStep({lm.id: lm.position.copy() for lm in pool.landmarks},
                            prev_root, False)
    delta = deltas[best]
    positions = {}
    for lm, cmap, argy, argx, q in recover:
        if cmap is None:
            positions[lm.id] = lm.position.copy()
            continue
        qx, qy, ok = q
        if not ok[best]:
            positions[lm.id] = lm.position.copy()
            continue
        yy = int(argy[qy[best], qx[best]])
        xx = int(argx[qy[best], qx[best]])
        positions[lm.id] = cmap.origin + np.array([xx, yy], dtype=np.int64)
    return LandmarkStep(positions, prev_root + delta, True)


def landmark_energy(pool: LandmarkPool, cost_maps: dict, root,
                    weights: Weights) -> float:
    """E over the landmark variables: matching costs plus root springs."""
    if len(pool) == 0 or weights.w_land == 0.0:
        return 0.0
    prev_root = pool.prev_root
    e = 0.0
    for lm in pool.landmarks:
        cmap = cost_maps.get(lm.id)
        if cmap is not None and cmap.phi.size:
            e += cmap.value_at(lm.position)
        rel = (lm.position.astype(float) - np.asarray(root, dtype=float)
               - lm.prev_position.astype(float) + prev_root)
        e += 0.5 * float(rel @ rel)
    return weights.w_land * e


def coupling_energy(pool: LandmarkPool, curve: RotoCurve,
                    weights: Weights) -> float:
    if len(pool) == 0 or weights.w_joint == 0.0:
        return 0.0
    e = 0.0
    for lm in pool.landmarks:
        for nidx, mu in lm.pairings:
            rel = (curve.vertices[nidx].astype(float)
                   - lm.position.astype(float) - mu)
            e += 0.5 * float(rel @ rel)
    return weights.w_joint * e


def evaluate_energy(frame: Frame, curve: RotoCurve, pool, local_models,
                    green_field, cost_maps, root, weights: Weights,
                    geom: DeltaGeometry) -> EnergyBreakdown:
    costs = ContourCosts(frame, curve, local_models, green_field, weights, geom)
    n = len(curve)
    loc = np.empty(n)
    glob = np.empty(n)
    for i in range(n):
        loc[i], glob[i] = costs.edge_cost(i)
    e_curve = float(loc.sum() + glob.sum())
    e_land = landmark_energy(pool, cost_maps, root, weights) if pool else 0.0
    e_joint = coupling_energy(pool, curve, weights) if pool else 0.0
    return EnergyBreakdown(e_curve, e_land, e_joint,
                           e_curve + e_land + e_joint, loc, glob)


def solve_cyclic_chain(unary: np.ndarray, pairs):
    """Exact minimizer of a cyclic first-order chain over D states per node.

    unary is (N, D); pairs[n] is (D, D) coupling node n with node (n+1) % N.
    Conditions on each state of node 0 and runs Viterbi on the rest; ties
    resolve to the first (lexicographically smallest) index everywhere.
    Returns (states (N,), energy, per_branch) with per_branch listing
    (energy, states) for every feasible node-0 state, best first.
    """
    N, D = unary.shape
    branches = []
    for d1 in range(D):
        if not np.isfinite(unary[0, d1]):
            continue
        msg = unary[1] + pairs[0][d1, :]
        backs = []
        for n in range(2, N):
            cand = msg[:, None] + pairs[n - 1]
            bp = np.argmin(cand, axis=0)
            msg = cand[bp, np.arange(D)] + unary[n]
            backs.append(bp)
        total = msg + pairs[N - 1][:, d1]
        dN = int(np.argmin(total))
        energy = float(total[dN] + unary[0, d1])
        if not np.isfinite(energy):
            continue
        states = np.empty(N, dtype=np.int64)
        states[0] = d1
        states[N - 1] = dN
        for n in range(N - 2, 0, -1):
            states[n] = int(backs[n - 1][states[n + 1]])
        branches.append((energy, states))
    if not branches:
        raise ValueError("no feasible configuration in the move space")
    branches.sort(key=lambda b: (b[0], b[1][0]))
    best_energy, best_states = branches[0]
    return best_states, best_energy, branches


_GROUP_CACHE: dict = {}


def move_groups(window: MoveWindow) -> dict:
    """Pairs (i, j) of move indices grouped by their displacement difference."""
    cached = _GROUP_CACHE.get(window.radius)
    if cached is not None:
        return cached
    moves = window.moves
    groups: dict = {}
    for i in range(len(moves)):
        for j in range(len(moves)):
            key = (int(moves[j, 0] - moves[i, 0]), int(moves[j, 1] - moves[i, 1]))
            groups.setdefault(key, ([], []))
            groups[key][0].append(i)
            groups[key][1].append(j)
    groups = {k: (np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64))
              for k, (ii, jj) in groups.items()}
    _GROUP_CACHE[window.radius] = groups
    return groups


def contour_tables(frame: Frame, curve: RotoCurve, pool, local_models,
                   green_field, weights: Weights, geom: DeltaGeometry,
                   window: MoveWindow):
    """(unary (N,D), pair tables) for the cyclic move DP on this curve."""
    moves = window.moves
    D = window.count
    N = len(curve)
    v = curve.vertices
    cand = v[:, None, :] + moves[None, :, :]
    unary = np.zeros((N, D))
    if weights.w_joint != 0.0 and pool is not None and len(pool):
        for lm in pool.landmarks:
            for nidx, mu in lm.pairings:
                target = lm.position.astype(np.float64) + mu
                rel = cand[nidx].astype(np.float64) - target
                unary[nidx] += weights.w_joint * 0.5 * np.sum(rel * rel, axis=1)
    # vertices may sit anywhere on the pixel-corner lattice [0, W] x [0, H]
    oob = ((cand[..., 0] < 0) | (cand[..., 0] > frame.width)
           | (cand[..., 1] < 0) | (cand[..., 1] > frame.height))
    unary[oob] = np.inf
    costs = ContourCosts(frame, curve, local_models, green_field, weights,
                         geom, move_radius=window.radius)
    pairs = [costs.pair_table(n, window) for n in range(N)]
    return unary, pairs


@dataclass
class ContourStep:
    curve: RotoCurve
    energy: float
    flag_stuck: bool = False


def infer_contour(frame: Frame, curve: RotoCurve, pool, local_models,
                  green_field, weights: Weights, geom: DeltaGeometry,
                  window: MoveWindow) -> ContourStep:
    """Exact cyclic-Viterbi minimization over the D^N move space.

    Branch winners are tried best-first; one that self-intersects or flips
    orientation is rejected. If nothing at least as good as the standing
    configuration survives, the curve is kept and the step flagged.
    """
    unary, pairs = contour_tables(frame, curve, pool, local_models,
                                  green_field, weights, geom, window)
    z = window.zero_index
    current = float(sum(unary[n, z] for n in range(len(curve)))
                    + sum(pairs[n][z, z] for n in range(len(curve))))
    _, _, branches = solve_cyclic_chain(unary, pairs)
    moves = window.moves
    want_cw = curve.is_clockwise()
    # improvements below float-recomputation noise do not count as moves
    margin = 1e-9 * max(1.0, abs(current))
    rejected_better = False
    for energy, states in branches:
        if energy >= current - margin:
            break
        cand = RotoCurve((curve.vertices + moves[states]).copy())
        if cand.is_simple() and cand.is_clockwise() == want_cw:
            return ContourStep(cand, float(energy))
        rejected_better = True
    return ContourStep(curve, current, flag_stuck=rejected_better)


def _table_energy(unary, pairs, states) -> float:
    n = len(pairs)
    return float(sum(unary[k, states[k]] for k in range(n))
                 + sum(pairs[k][states[k], states[(k + 1) % n]]
                       for k in range(n)))


def alternate(frame: Frame, curve: RotoCurve, pool, local_models, green_field,
              cost_maps, weights: Weights, geom: DeltaGeometry,
              window: MoveWindow, max_iters: int = DEFAULT_MAX_ITERS,
              tol: float = None, root=None, root_radius: int = ROOT_RADIUS):
    """Alternate exact landmark and contour block steps until converged.

    Returns (curve, root, trace, iterations, stuck_flag). The trace holds the
    total energy at start and after every block step, each term evaluated
    once per configuration through a single code path; a block result that
    fails to lower its own objective (float near-ties) is reverted, so the
    trace is non-increasing unconditionally. tol=None uses 1e-3 * |E_0|.
    """
    if root is None:
        root = pool.prev_root if pool is not None else np.zeros(2)
    has_pool = pool is not None and len(pool) > 0
    z = window.zero_index

    def pure_curve_energy(c: RotoCurve) -> float:
        tiny = MoveWindow(0)
        costs = ContourCosts(frame, c, local_models, green_field, weights,
                             geom)
        return float(sum(costs.pair_table(n, tiny)[0, 0] for n in range(len(c))))

    e_c = pure_curve_energy(curve)
    e_land = landmark_energy(pool, cost_maps, root, weights) if has_pool else 0.0
    e_joint = coupling_energy(pool, curve, weights) if has_pool else 0.0
    trace = [e_c + e_land + e_joint]
    if tol is None:
        tol = 1e-3 * abs(trace[0])
    stuck = False
    iterations = 0
    want_cw = curve.is_clockwise()
    moves = window.moves
    for _ in range(max_iters):
        iterations += 1
        before = trace[-1]
        if has_pool and (weights.w_land != 0.0 or weights.w_joint != 0.0):
            old_positions = {lm.id: lm.position.copy()
                             for lm in pool.landmarks}
            lstep = infer_landmarks(pool, cost_maps, curve, weights,
                                    root_radius)
            for lm in pool.landmarks:
                if lm.id in lstep.positions:
                    lm.position = lstep.positions[lm.id]
            new_land = landmark_energy(pool, cost_maps, lstep.root, weights)
            new_joint = coupling_energy(pool, curve, weights)
            if new_land + new_joint <= e_land + e_joint:
                root = lstep.root
                e_land, e_joint = new_land, new_joint
            else:  # exact up to rounding; never accept a float-tie increase
                for lm in pool.landmarks:
                    lm.position = old_positions[lm.id]
            trace.append(e_c + e_land + e_joint)
        unary, pairs = contour_tables(frame, curve, pool, local_models,
                                      green_field, weights, geom, window)
        zero_states = np.full(len(pairs), z, dtype=np.int64)
        current_tab = _table_energy(unary, pairs, zero_states)
        _, _, branches = solve_cyclic_chain(unary, pairs)
        margin = 1e-9 * max(1.0, abs(current_tab))
        for energy, states in branches:
            if energy >= current_tab - margin:
                break
            cand = RotoCurve((curve.vertices + moves[states]).copy())
            if not (cand.is_simple() and cand.is_clockwise() == want_cw):
                stuck = True
                continue
            new_e_c = float(sum(pairs[k][states[k], states[(k + 1) % len(pairs)]]
                                for k in range(len(pairs))))
            cand_joint = (coupling_energy(pool, cand, weights)
                          if has_pool else 0.0)
            if new_e_c + cand_joint <= e_c + e_joint:
                curve = cand
                e_c, e_joint = new_e_c, cand_joint
            break
        trace.append(e_c + e_land + e_joint)
        if before - trace[-1] < tol:
            break
    return curve, root, np.array(trace), iterations, stuck

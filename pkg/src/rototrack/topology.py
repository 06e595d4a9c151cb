"""Graph-cut topology proposals: an instrumental pixel labeling suggests
drastic curve edits, which are only accepted if the joint energy drops."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .appearance import FgBgModel, log_density_many
from .geometry import CurveError, RegionMask, RotoCurve
from .imagery import Frame

CAP_SCALE = float(2 ** 20)  # float costs quantized to integer capacities
GAMMA = 10.0
AREA_THRESHOLD_FRAC = 0.005


@dataclass
class FlowGraph:
    """Directed arcs with integer capacities; source and sink are virtual
    nodes with ids node_count and node_count + 1."""

    node_count: int
    tails: np.ndarray  # (A,) int64
    heads: np.ndarray  # (A,) int64
    caps: np.ndarray   # (A,) int64, non-negative

    @property
    def source(self) -> int:
        return self.node_count

    @property
    def sink(self) -> int:
        return self.node_count + 1


def max_flow_min_cut(graph: FlowGraph):
    """Exact max flow; returns (cut value, source-side bool labels per node)."""
    if np.any(graph.caps < 0):
        raise ValueError("capacities must be non-negative")
    n = graph.node_count + 2
    mat = coo_matrix(
        (graph.caps, (graph.tails, graph.heads)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    result = maximum_flow(mat, graph.source, graph.sink)
    flow = result.flow
    residual = csr_matrix(mat - flow)
    residual.data = np.maximum(residual.data, 0)
    residual.eliminate_zeros()
    # source side of the min cut: reachable in the residual graph
    reach = np.zeros(n, dtype=bool)
    stack = [graph.source]
    reach[graph.source] = True
    indptr, indices, data = residual.indptr, residual.indices, residual.data
    while stack:
        u = stack.pop()
        for k in range(indptr[u], indptr[u + 1]):
            if data[k] > 0 and not reach[indices[k]]:
                reach[indices[k]] = True
                stack.append(indices[k])
    return int(result.flow_value), reach[: graph.node_count]


def _nearest_edge_paint(curve: RotoCurve, shape, reach: float) -> np.ndarray:
    """Per-pixel index of the nearest curve edge within `reach`, else -1."""
    h, w = shape
    owner = np.full((h, w), -1, dtype=np.int64)
    best = np.full((h, w), np.inf)
    v = curve.vertices.astype(np.float64)
    for n in range(len(curve)):
        a = v[n]
        b = v[(n + 1) % len(curve)]
        dx, dy = b - a
        d2 = dx * dx + dy * dy
        if d2 == 0:
            continue
        margin = reach + 1.0
        x0 = max(int(np.floor(min(a[0], b[0]) - margin)), 0)
        x1 = min(int(np.ceil(max(a[0], b[0]) + margin)) + 1, w)
        y0 = max(int(np.floor(min(a[1], b[1]) - margin)), 0)
        y1 = min(int(np.ceil(max(a[1], b[1]) + margin)) + 1, h)
        if x1 <= x0 or y1 <= y0:
            continue
        xs, ys = np.meshgrid(np.arange(x0, x1), np.arange(y0, y1))
        cx = xs + 0.5 - a[0]
        cy = ys + 0.5 - a[1]
        t = np.clip((cx * dx + cy * dy) / d2, 0.0, 1.0)
        dist = np.hypot(cx - t * dx, cy - t * dy)
        sel = (dist <= reach) & (dist < best[y0:y1, x0:x1])
        bb = best[y0:y1, x0:x1]
        oo = owner[y0:y1, x0:x1]
        bb[sel] = dist[sel]
        oo[sel] = n
    return owner


def instrumental_energy_graph(frame: Frame, curve: RotoCurve, mask: RegionMask,
                              local_models, global_model: FgBgModel,
                              band: float, dilation: int, gamma: float = GAMMA):
    """Submodular fg/bg labeling energy on a band around the current region.

    Unaries are negative log densities from the nearest local model within
    `band` of the curve and from the global model elsewhere; pairwise terms
    are contrast-weighted Potts on 4-neighbors. Pixels outside the dilated
    band keep their current label as a hard boundary condition.

    Returns (FlowGraph, node_ids) where node_ids is an (H, W) int map with
    -1 for pixels outside the band.
    """
    h, w = mask.height, mask.width
    inside = mask.inside
    struct = ndimage.generate_binary_structure(2, 1)
    grown = ndimage.binary_dilation(inside, struct, iterations=dilation)
    shrunk = ndimage.binary_erosion(inside, struct, iterations=dilation)
    active = grown & ~shrunk
    node_ids = np.full((h, w), -1, dtype=np.int64)
    ys, xs = np.nonzero(active)
    node_ids[ys, xs] = np.arange(len(ys))
    n_nodes = len(ys)
    colors = frame.rgb[ys, xs]
    owner = _nearest_edge_paint(curve, (h, w), band)[ys, xs]
    cost_fg = np.empty(n_nodes)
    cost_bg = np.empty(n_nodes)
    far = owner < 0
    if far.any():
        cost_fg[far] = -log_density_many(global_model.fg, colors[far])
        cost_bg[far] = -log_density_many(global_model.bg, colors[far])
    for n in np.unique(owner[owner >= 0]):
        sel = owner == n
        model = local_models[n]
        cost_fg[sel] = -log_density_many(model.fg, colors[sel])
        cost_bg[sel] = -log_density_many(model.bg, colors[sel])
    shift = np.minimum(cost_fg, cost_bg)
    cost_fg -= shift
    cost_bg -= shift
    # contrast-dependent 4-neighbor couplings; frozen neighbors contribute a
    # bias toward their fixed label instead of an arc
    pair_entries = []   # ("pair", us, vs, diff2) | ("frozen", us, is_fg, diff2)
    for dy, dx in ((0, 1), (1, 0)):
        qy, qx = ys + dy, xs + dx
        ok = (qy < h) & (qx < w)
        nbr = np.full(n_nodes, -1, dtype=np.int64)
        nbr[ok] = node_ids[qy[ok], qx[ok]]
        both = nbr >= 0
        if both.any():
            d = frame.rgb[ys[both], xs[both]] - frame.rgb[qy[both], qx[both]]
            pair_entries.append(("pair", np.nonzero(both)[0], nbr[both],
                                 np.sum(d * d, axis=1)))
        frozen = ok & (nbr < 0)
        if frozen.any():
            fy, fx = qy[frozen], qx[frozen]
            d = frame.rgb[ys[frozen], xs[frozen]] - frame.rgb[fy, fx]
            pair_entries.append(("frozen", np.nonzero(frozen)[0],
                                 inside[fy, fx], np.sum(d * d, axis=1)))
    if pair_entries:
        all_diff = np.concatenate([e[3] for e in pair_entries])
        beta = 1.0 / max(float(all_diff.mean()), 1e-8)
    else:
        beta = 1.0
    source = n_nodes
    sink = n_nodes + 1
    tails, heads, caps = [], [], []
    for kind, us, other, diff2 in pair_entries:
        q = np.round(gamma * np.exp(-beta * diff2) * CAP_SCALE).astype(np.int64)
        if kind == "pair":
            tails.append(us)
            heads.append(other)
            caps.append(q)
            tails.append(other)
            heads.append(us)
            caps.append(q)
        else:
            is_fg = other
            # separating q from a frozen-fg neighbor costs the coupling
            tails.append(np.full(int(is_fg.sum()), source))
            heads.append(us[is_fg])
            caps.append(q[is_fg])
            tails.append(us[~is_fg])
            heads.append(np.full(int((~is_fg).sum()), sink))
            caps.append(q[~is_fg])
    qf = np.round(cost_fg * CAP_SCALE).astype(np.int64)
    qb = np.round(cost_bg * CAP_SCALE).astype(np.int64)
    # source side == fg: s->q paid when q is bg, q->t paid when q is fg
    tails.append(np.full(n_nodes, source))
    heads.append(np.arange(n_nodes))
    caps.append(qb)
    tails.append(np.arange(n_nodes))
    heads.append(np.full(n_nodes, sink))
    caps.append(qf)
    graph = FlowGraph(n_nodes,
                      np.concatenate(tails).astype(np.int64),
                      np.concatenate(heads).astype(np.int64),
                      np.concatenate(caps).astype(np.int64))
    return graph, node_ids


def segmentation_proposal(frame: Frame, curve: RotoCurve, mask: RegionMask,
                          local_models, global_model: FgBgModel, band: float,
                          dilation: int, gamma: float = GAMMA) -> np.ndarray:
    """Min-cut labeling of the band, frozen pixels keeping their current label."""
    graph, node_ids = instrumental_energy_graph(
        frame, curve, mask, local_models, global_model, band, dilation, gamma)
    _, labels = max_flow_min_cut(graph)
    proposed = mask.inside.copy()
    active = node_ids >= 0
    proposed[active] = labels[node_ids[active]]
    return proposed


_DIRS = {(1, 0): 0, (0, 1): 1, (-1, 0): 2, (0, -1): 3}
_BY_CODE = [(1, 0), (0, 1), (-1, 0), (0, -1)]


def trace_region_boundary(region: np.ndarray) -> np.ndarray:
    """Outer boundary of a pixel region as integer corner vertices, clockwise.

    Walks the directed edges of the pixel-square union (interior on the
    right); at pinch corners the sharpest right turn keeps the loop simple.
    The traced polygon rasterizes back to exactly this region (minus holes).
    """
    h, w = region.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = region
    edges: dict = {}

    def add(x0, y0, x1, y1):
        edges.setdefault((x0, y0), []).append((x1, y1))

    ys, xs = np.nonzero(region)
    for j, i in zip(ys, xs):
        if not padded[j, i + 1]:        # missing north
            add(i, j, i + 1, j)
        if not padded[j + 1, i + 2]:    # missing east
            add(i + 1, j, i + 1, j + 1)
        if not padded[j + 2, i + 1]:    # missing south
            add(i + 1, j + 1, i, j + 1)
        if not padded[j + 1, i]:        # missing west
            add(i, j + 1, i, j)
    if not edges:
        raise CurveError("empty region has no boundary")
    start = min(edges.keys(), key=lambda c: (c[1], c[0]))
    loop = [start]
    prev_dir = (0, -1)  # pretend we came from below: first move is east
    cur = start
    for _ in range(4 * (len(edges) + 8)):
        outs = edges.get(cur)
        if not outs:
            raise CurveError("boundary walk broke (open chain)")
        if len(outs) == 1:
            nxt = outs.pop(0)
        else:
            # right turn first, relative to incoming direction
            code = _DIRS[prev_dir]
            for turn in (3, 0, 1, 2):  # right, straight, left, back
                want = _BY_CODE[(code + turn) % 4]
                cand = (cur[0] + want[0], cur[1] + want[1])
                if cand in outs:
                    nxt = cand
                    outs.remove(cand)
                    break
            else:
                nxt = outs.pop(0)
        prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
        cur = nxt
        if cur == start:
            break
        loop.append(cur)
    else:
        raise CurveError("boundary walk did not close")
    pts = np.array(loop, dtype=np.int64)
    # drop collinear runs
    keep = []
    n = len(pts)
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        if (b[0] - a[0]) * (c[1] - b[1]) != (b[1] - a[1]) * (c[0] - b[0]):
            keep.append(i)
    return pts[keep]


def region_to_curve(region: np.ndarray, spacing: float):
    """Largest component's boundary as a simple clockwise RotoCurve, resampled."""
    from .geometry import resample_curve

    labels, count = ndimage.label(region)
    if count == 0:
        raise CurveError("empty proposal region")
    if count > 1:
        areas = ndimage.sum_labels(np.ones_like(labels), labels,
                                   np.arange(1, count + 1))
        region = labels == (int(np.argmax(areas)) + 1)
    pts = trace_region_boundary(region)
    if len(pts) < 3:
        raise CurveError("degenerate traced boundary")
    curve = RotoCurve(pts).ensure_clockwise()
    if not curve.is_simple():
        raise CurveError("traced boundary self-intersects")
    if curve.perimeter() >= 3 * spacing:
        curve = resample_curve(curve, spacing)
    return curve

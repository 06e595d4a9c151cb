"""Curve pre-warping from landmark correspondences: RANSAC similarity or
per-vertex projection of landmark motion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CurveError, RotoCurve

INLIER_TOL = 3.0
MAX_TRIALS = 200


class WarpError(ValueError):
    """Raised for underdetermined or degenerate correspondence sets."""


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: float
    translation: np.ndarray  # (2,)

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.matrix().T + self.translation

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        inv_rot = -self.rotation
        c, s = np.cos(inv_rot), np.sin(inv_rot)
        m = inv_scale * np.array([[c, -s], [s, c]])
        return SimilarityTransform(inv_scale, inv_rot, -(m @ self.translation))

    @staticmethod
    def identity() -> "SimilarityTransform":
        return SimilarityTransform(1.0, 0.0, np.zeros(2))


def fit_similarity(src: np.ndarray, dst: np.ndarray) -> SimilarityTransform:
    """Closed-form least-squares similarity (Umeyama) from >= 2 point pairs."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape[0] < 2:
        raise WarpError("need at least 2 correspondences")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    ds = src - mu_s
    dd = dst - mu_d
    var_s = float((ds * ds).sum()) / len(src)
    if var_s < 1e-12:
        raise WarpError("degenerate correspondences (coincident points)")
    cov = dd.T @ ds / len(src)
    u, d, vt = np.linalg.svd(cov)
    s_fix = np.eye(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_fix[1, 1] = -1.0
    rot = u @ s_fix @ vt
    scale = float((d * np.diag(s_fix)).sum()) / var_s
    if scale <= 0:
        raise WarpError("non-positive scale fit")
    trans = mu_d - scale * rot @ mu_s
    angle = float(np.arctan2(rot[1, 0], rot[0, 0]))
    return SimilarityTransform(scale, angle, trans)


def _minimal_similarity(p1, p2, q1, q2):
    """Similarity mapping (p1, p2) to (q1, q2) via complex division."""
    zp = complex(p2[0] - p1[0], p2[1] - p1[1])
    if zp == 0:
        return None
    zq = complex(q2[0] - q1[0], q2[1] - q1[1])
    a = zq / zp
    if abs(a) < 1e-12:
        return None
    b = complex(q1[0], q1[1]) - a * complex(p1[0], p1[1])
    return SimilarityTransform(abs(a), float(np.angle(a)),
                               np.array([b.real, b.imag]))


def estimate_similarity_ransac(prev_pts, curr_pts, seed: int,
                               inlier_tol: float = INLIER_TOL,
                               max_trials: int = MAX_TRIALS):
    """RANSAC over 2-point samples, then least-squares refit on the consensus.

    Returns (SimilarityTransform, inlier mask). Deterministic given the seed;
    with noiseless data every point is an inlier and the result equals the
    direct closed-form fit.
    """
    prev_pts = np.asarray(prev_pts, dtype=np.float64)
    curr_pts = np.asarray(curr_pts, dtype=np.float64)
    if prev_pts.shape != curr_pts.shape or prev_pts.ndim != 2:
        raise WarpError("correspondence lists must be equal-length point lists")
    n = prev_pts.shape[0]
    if n < 2:
        raise WarpError("need at least 2 correspondences")
    rng = np.random.default_rng(seed)
    best_count = -1
    best_err = np.inf
    best_mask = None
    for _ in range(max_trials):
        i, j = rng.choice(n, size=2, replace=False)
        t = _minimal_similarity(prev_pts[i], prev_pts[j],
                                curr_pts[i], curr_pts[j])
        if t is None:
            continue
        err = np.hypot(*(t.apply(prev_pts) - curr_pts).T)
        mask = err <= inlier_tol
        count = int(mask.sum())
        rms = float(np.sqrt(np.mean(err[mask] ** 2))) if count else np.inf
        if count > best_count or (count == best_count and rms < best_err):
            best_count, best_err, best_mask = count, rms, mask
    if best_mask is None or best_count < 2:
        raise WarpError("all RANSAC samples degenerate")
    refined = fit_similarity(prev_pts[best_mask], curr_pts[best_mask])
    err = np.hypot(*(refined.apply(prev_pts) - curr_pts).T)
    return refined, err <= inlier_tol


def warp_curve(curve: RotoCurve, t: SimilarityTransform, width: int,
               height: int) -> RotoCurve:
    """Map vertices, round to integer pixels, clamp in-bounds, re-check shape."""
    warped = t.apply(curve.vertices.astype(np.float64))
    out = np.round(warped).astype(np.int64)
    out[:, 0] = np.clip(out[:, 0], 0, width - 1)
    out[:, 1] = np.clip(out[:, 1], 0, height - 1)
    keep = np.ones(len(out), dtype=bool)
    for i in range(len(out)):
        if np.array_equal(out[i], out[(i + 1) % len(out)]):
            keep[(i + 1) % len(out)] = False
    out = out[keep]
    if len(out) < 3:
        raise CurveError("warp collapsed the curve")
    warped_curve = RotoCurve(out)
    if warped_curve.signed_area() == 0:
        raise CurveError("warped curve degenerate")
    return warped_curve


def warp_by_node_projection(curve: RotoCurve, displacements: dict, width: int,
                            height: int) -> RotoCurve:
    """Translate each vertex by the mean displacement of its paired landmarks.

    `displacements` maps vertex index -> list of (2,) landmark motion vectors;
    vertices without pairings use the global mean motion. An empty mapping is
    an identity warp.
    """
    all_moves = [d for moves in displacements.values() for d in moves]
    if not all_moves:
        return curve
    global_mean = np.mean(all_moves, axis=0)
    out = curve.vertices.astype(np.float64).copy()
    for i in range(len(out)):
        moves = displacements.get(i)
        out[i] += np.mean(moves, axis=0) if moves else global_mean
    rounded = np.round(out).astype(np.int64)
    rounded[:, 0] = np.clip(rounded[:, 0], 0, width - 1)
    rounded[:, 1] = np.clip(rounded[:, 1], 0, height - 1)
    keep = np.ones(len(rounded), dtype=bool)
    for i in range(len(rounded)):
        if np.array_equal(rounded[i], rounded[(i + 1) % len(rounded)]):
            keep[(i + 1) % len(rounded)] = False
    rounded = rounded[keep]
    if len(rounded) < 3:
        raise CurveError("projection warp collapsed the curve")
    return RotoCurve(rounded)

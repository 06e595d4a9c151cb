"""Interior landmarks: extremal-region detection, correlation filters, pool upkeep."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

from .geometry import RegionMask, RotoCurve
from .imagery import Frame

FILTER_SIZE = 31
FILTER_REG = 1e-2
RESPONSE_SIGMA = 2.0
PSR_THRESHOLD = 5.0
SEARCH_SIDE = 61
MIN_SEPARATION = 15
POOL_CAPACITY = 16
PAIR_COUNT = 2
MSER_DELTA = 5
_FRESH_PSR = 99.0


class PatchError(ValueError):
    """Raised when a filter patch does not fit inside the frame."""


def _hann2d(size: int) -> np.ndarray:
    w = np.hanning(size)
    return np.outer(w, w)


def _gaussian_target(size: int, sigma: float) -> np.ndarray:
    h = size // 2
    d = np.arange(size) - h
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2 * sigma * sigma))
    return np.roll(np.roll(g, -h, axis=0), -h, axis=1)


@dataclass
class CorrelationFilter:
    """Linear ridge filter trained to answer a Gaussian peak at the patch center.

    `taps` is the spatial template aligned with patch samples: the response at
    a window position is <taps * window_fn, patch> with the patch mean removed,
    all folded into the detection kernel for FFT evaluation.
    """

    taps: np.ndarray  # (F, F) float64
    size: int

    def detection_kernel(self) -> np.ndarray:
        return self.taps * _hann2d(self.size)

    def to_dict(self) -> dict:
        return {"size": self.size, "taps": self.taps.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "CorrelationFilter":
        return CorrelationFilter(np.array(d["taps"], dtype=np.float64),
                                 int(d["size"]))


def train_filter(frame: Frame, center, size: int = FILTER_SIZE,
                 reg: float = FILTER_REG,
                 sigma_resp: float = RESPONSE_SIGMA) -> CorrelationFilter:
    cx, cy = int(center[0]), int(center[1])
    h = size // 2
    if not (h <= cx < frame.width - h and h <= cy < frame.height - h):
        raise PatchError(f"patch at ({cx}, {cy}) out of bounds")
    patch = frame.gray[cy - h: cy - h + size, cx - h: cx - h + size]
    x = (patch - patch.mean()) * _hann2d(size)
    X = np.fft.fft2(x)
    G = np.fft.fft2(_gaussian_target(size, sigma_resp))
    # conj(H) with response R = Z . conj(H); taps h = ifft(conj of that)
    resp_fft = G * np.conj(X) / (X * np.conj(X) + reg)
    taps = np.real(np.fft.ifft2(np.conj(resp_fft)))
    return CorrelationFilter(taps, size)


@dataclass
class CostMap:
    """phi over landmark positions: phi = -response, lower is a better match."""

    phi: np.ndarray        # (h, w) over valid patch centers; may be empty
    origin: np.ndarray     # (2,) int: position of phi[0, 0] in frame coords
    psr: float
    peak: np.ndarray       # (2,) int: position of the response peak

    def value_at(self, position) -> float:
        """phi at an integer position, clamped to the map (empty map costs 0)."""
        if self.phi.size == 0:
            return 0.0
        x = int(np.clip(position[0] - self.origin[0], 0, self.phi.shape[1] - 1))
        y = int(np.clip(position[1] - self.origin[1], 0, self.phi.shape[0] - 1))
        return float(self.phi[y, x])

    def contains(self, position) -> bool:
        x, y = int(position[0]) - self.origin[0], int(position[1]) - self.origin[1]
        return 0 <= x < self.phi.shape[1] and 0 <= y < self.phi.shape[0]


def response_map(frame: Frame, filt: CorrelationFilter, x0: int, y0: int,
                 x1: int, y1: int):
    """Filter response over window [x0,x1) x [y0,y1); per-patch mean removed."""
    window = frame.gray[y0:y1, x0:x1]
    size = filt.size
    if window.shape[0] < size or window.shape[1] < size:
        return None
    kernel = filt.detection_kernel()
    corr = signal.fftconvolve(window, kernel[::-1, ::-1], mode="valid")
    boxsum = signal.fftconvolve(window, np.ones((size, size)), mode="valid")
    return corr - boxsum / (size * size) * kernel.sum()


def psr_of(response: np.ndarray, exclusion: int = 11) -> float:
    """Peak-to-sidelobe ratio with a square exclusion zone around the peak."""
    if response.size <= exclusion * exclusion:
        return 0.0
    py, px = np.unravel_index(int(np.argmax(response)), response.shape)
    mask = np.ones_like(response, dtype=bool)
    e = exclusion // 2
    mask[max(py - e, 0): py + e + 1, max(px - e, 0): px + e + 1] = False
    side = response[mask]
    if side.size == 0 or side.std() < 1e-12:
        return 0.0
    return float((response[py, px] - side.mean()) / side.std())


@dataclass
class Landmark:
    id: int
    position: np.ndarray       # (2,) int64, current frame
    prev_position: np.ndarray  # (2,) int64, previous frame
    filter: CorrelationFilter
    pairings: list             # [(vertex_index, mu (2,) float64), ...]
    psr: float = _FRESH_PSR

    def to_dict(self) -> dict:
        return {"id": self.id, "position": self.position.tolist(),
                "prev_position": self.prev_position.tolist(),
                "filter": self.filter.to_dict(),
                "pairings": [[int(n), mu.tolist()] for n, mu in self.pairings],
                "psr": self.psr}

    @staticmethod
    def from_dict(d: dict) -> "Landmark":
        return Landmark(int(d["id"]),
                        np.array(d["position"], dtype=np.int64),
                        np.array(d["prev_position"], dtype=np.int64),
                        CorrelationFilter.from_dict(d["filter"]),
                        [(int(n), np.array(mu, dtype=np.float64))
                         for n, mu in d["pairings"]],
                        float(d["psr"]))


@dataclass
class LandmarkPool:
    landmarks: list = field(default_factory=list)
    capacity: int = POOL_CAPACITY
    next_id: int = 0

    def __len__(self) -> int:
        return len(self.landmarks)

    @property
    def root(self) -> np.ndarray:
        """Virtual root: centroid of current landmark positions."""
        if not self.landmarks:
            return np.zeros(2)
        return np.mean([lm.position for lm in self.landmarks], axis=0)

    @property
    def prev_root(self) -> np.ndarray:
        if not self.landmarks:
            return np.zeros(2)
        return np.mean([lm.prev_position for lm in self.landmarks], axis=0)

    def advance(self) -> None:
        for lm in self.landmarks:
            lm.prev_position = lm.position.copy()

    def to_dict(self) -> dict:
        return {"capacity": self.capacity, "next_id": self.next_id,
                "landmarks": [lm.to_dict() for lm in self.landmarks]}

    @staticmethod
    def from_dict(d: dict) -> "LandmarkPool":
        return LandmarkPool([Landmark.from_dict(x) for x in d["landmarks"]],
                            int(d["capacity"]), int(d["next_id"]))


def match_cost_map(landmark: Landmark, frame: Frame, search_center,
                   s_side: int = SEARCH_SIDE) -> CostMap:
    cx, cy = int(search_center[0]), int(search_center[1])
    half = s_side // 2
    x0, x1 = max(cx - half, 0), min(cx + half + 1, frame.width)
    y0, y1 = max(cy - half, 0), min(cy + half + 1, frame.height)
    resp = response_map(frame, landmark.filter, x0, y0, x1, y1)
    if resp is None:
        return CostMap(np.empty((0, 0)), np.array([x0, y0]), 0.0,
                       np.array([cx, cy]))
    fh = landmark.filter.size // 2
    origin = np.array([x0 + fh, y0 + fh], dtype=np.int64)
    py, px = np.unravel_index(int(np.argmax(resp)), resp.shape)
    return CostMap(-resp, origin, psr_of(resp),
                   origin + np.array([px, py], dtype=np.int64))


def _mser_candidates(gray8: np.ndarray, allowed: np.ndarray,
                     delta: int = MSER_DELTA, max_area_frac: float = 0.25,
                     min_area: int = 9):
    """(score, cx, cy) extremal-region candidates; lower score = more stable.

    Threshold sweep on both polarities; a region's stability is the relative
    area growth across +-delta gray levels, tracked through its darkest pixel.
    """
    area_cap = max(min_area + 1, int(allowed.sum() * max_area_frac))
    levels = list(range(0, 256, delta))
    out = []
    for pol, img in enumerate((gray8, 255 - gray8)):
        labelled, areas_at = [], []
        for lv in levels:
            lab, nlab = ndimage.label(allowed & (img <= lv))
            labelled.append(lab)
            areas_at.append(np.bincount(lab.ravel(), minlength=nlab + 1))
        best: dict = {}
        for i in range(1, len(levels) - 1):
            labels = labelled[i]
            nlab = labels.max()
            if nlab == 0:
                continue
            idx = np.arange(1, nlab + 1)
            reps = ndimage.minimum_position(img, labels, idx)
            lo, hi = labelled[i - 1], labelled[i + 1]
            for comp, rep in zip(idx, reps):
                area = areas_at[i][comp]
                if not (min_area <= area <= area_cap):
                    continue
                ry, rx = rep
                lab_lo = lo[ry, rx]
                if lab_lo == 0:
                    continue  # region not yet born delta levels below
                a_lo = areas_at[i - 1][lab_lo]
                a_hi = areas_at[i + 1][hi[ry, rx]] if hi[ry, rx] else area
                score = float(a_hi - a_lo) / float(area)
                key = (pol, int(ry), int(rx))
                if key not in best or score < best[key][0]:
                    cy, cx = ndimage.center_of_mass(labels == comp)
                    best[key] = (score, float(cx), float(cy))
        out.extend(best.values())
    return out


def detect_candidates(frame: Frame, mask: RegionMask, count: int,
                      min_separation: float = MIN_SEPARATION,
                      patch_half: int = FILTER_SIZE // 2,
                      existing=None) -> list:
    """Up to `count` stable interior points, ranked, mutually separated."""
    if count <= 0 or not mask.inside.any():
        return []
    eroded = ndimage.binary_erosion(
        mask.inside, structure=np.ones((3, 3)), iterations=patch_half)
    eroded[:patch_half, :] = False
    eroded[-patch_half:, :] = False
    eroded[:, :patch_half] = False
    eroded[:, -patch_half:] = False
    if not eroded.any():
        return []
    ys, xs = np.nonzero(mask.inside)
    y0, y1 = ys.min(), ys.max() + 1
    x0, x1 = xs.min(), xs.max() + 1
    gray8 = np.clip(frame.gray[y0:y1, x0:x1] * 255.0, 0, 255).astype(np.uint8)
    cands = _mser_candidates(gray8, mask.inside[y0:y1, x0:x1])
    cands.sort(key=lambda c: (c[0], c[1], c[2]))
    chosen = []
    taken = [np.asarray(p, dtype=float) for p in (existing or [])]
    for score, cx, cy in cands:
        p = np.array([x0 + cx, y0 + cy])
        pi = np.round(p).astype(np.int64)
        if not (0 <= pi[1] < mask.height and 0 <= pi[0] < mask.width):
            continue
        if not eroded[pi[1], pi[0]]:
            continue
        if any(np.hypot(*(p - q)) < min_separation for q in taken):
            continue
        chosen.append(pi)
        taken.append(p)
        if len(chosen) >= count:
            break
    return chosen


def _nearest_vertices(curve: RotoCurve, position, k: int):
    d = np.hypot(*(curve.vertices - np.asarray(position)).T)
    order = np.argsort(d, kind="stable")
    return [int(i) for i in order[:k]]


def make_landmark(pool: LandmarkPool, frame: Frame, curve: RotoCurve,
                  position, k_pair: int = PAIR_COUNT) -> Landmark:
    filt = train_filter(frame, position)
    pos = np.asarray(position, dtype=np.int64)
    pairings = [(n, curve.vertices[n].astype(np.float64) - pos)
                for n in _nearest_vertices(curve, pos, k_pair)]
    lm = Landmark(pool.next_id, pos.copy(), pos.copy(), filt, pairings)
    pool.next_id += 1
    return lm


def cull_and_repopulate(pool: LandmarkPool, frame: Frame, mask: RegionMask,
                        curve: RotoCurve, psr_threshold: float = PSR_THRESHOLD,
                        min_separation: float = MIN_SEPARATION,
                        k_pair: int = PAIR_COUNT) -> LandmarkPool:
    """Drop ambiguous or out-of-region landmarks, refill from new detections."""
    half = FILTER_SIZE // 2
    kept = []
    for lm in pool.landmarks:
        x, y = int(lm.position[0]), int(lm.position[1])
        if lm.psr < psr_threshold:
            continue
        if not (0 <= x < mask.width and 0 <= y < mask.height):
            continue
        if not mask.inside[y, x]:
            continue
        if not (half <= x < frame.width - half and half <= y < frame.height - half):
            continue
        kept.append(lm)
    out = LandmarkPool(kept, pool.capacity, pool.next_id)
    need = out.capacity - len(kept)
    if need > 0:
        existing = [lm.position for lm in kept]
        for pos in detect_candidates(frame, mask, need, min_separation,
                                     existing=existing):
            try:
                out.landmarks.append(
                    make_landmark(out, frame, curve, pos, k_pair))
            except PatchError:
                continue
    return out

"""Per-frame tracking orchestration: warp, alternate inference, topology
proposals, model adaptation, landmark upkeep, metrics, and checkpoints."""
from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import ndimage

from . import warp as warp_mod
from .appearance import FgBgModel, adapt_gmm, fit_gmm
from .geometry import (CurveError, RegionMask, RotoCurve, edge_support,
                       rasterize_region, resample_curve)
from .imagery import Frame
from .inference import (DeltaGeometry, EnergyBreakdown, MoveWindow, Weights,
                        alternate, evaluate_energy)
from .landmarks import LandmarkPool, cull_and_repopulate, match_cost_map
from .region_integral import GreenField, build_green_field
from .topology import segmentation_proposal, region_to_curve

PRESETS = ("baseline", "lean", "medium", "full")


class ConfigError(ValueError):
    """Raised for unknown keys or out-of-range configuration values."""


@dataclass
class RunConfig:
    """Every tunable of the tracker; presets reproduce the ablation ladder."""

    preset: str = "full"
    seed: int = 0
    # energy weights
    mu: float = 0.0002
    lam: float = 5.0
    w_loc: float = 1.0
    w_glob: float = 1.0
    w_land: float = 4.0
    w_joint: float = 0.25
    stretch_mode: str = "verbatim"
    # curve geometry
    support_half_width: float = 10.0
    move_radius: int = 2
    resample_spacing: float = 10.0
    edge_ratio_limit: float = 4.0
    reparam_enabled: bool = True
    # appearance models
    k_global: int = 5
    k_local: int = 3
    adapt_alpha: float = 0.1
    adapt_every_frame: bool = True
    max_region_samples: int = 3000
    # landmarks
    landmarks_enabled: bool = True
    pool_capacity: int = 16
    psr_threshold: float = 4.0
    min_separation: float = 12.0
    search_side: int = 61
    filter_size: int = 31
    filter_reg: float = 1e-2
    response_sigma: float = 2.0
    k_pair: int = 2
    root_radius: int = 8
    # warp
    warp_mode: str = "rigid_ransac"  # rigid_ransac | node_projection | none
    inlier_tol: float = 3.0
    ransac_trials: int = 200
    # topology proposals
    topology_enabled: bool = True
    gamma: float = 10.0
    area_threshold_frac: float = 0.005
    max_proposals: int = 3
    band_factor: float = 2.0      # local-model reach = band_factor * w
    dilation_factor: float = 1.5  # graph band = dilation_factor * w
    # inference loop
    max_iters: int = 10
    tol_rel: float = 1e-3
    adapt_before_cull: bool = True

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.warp_mode not in ("rigid_ransac", "node_projection", "none"):
            raise ConfigError(f"unknown warp mode {self.warp_mode!r}")
        if not (0.0 < self.adapt_alpha < 1.0):
            raise ConfigError("adapt_alpha must be in (0, 1)")
        if self.move_radius < 0 or self.max_iters < 1:
            raise ConfigError("move_radius >= 0 and max_iters >= 1 required")

    @staticmethod
    def from_preset(name: str, **overrides) -> "RunConfig":
        base = dict(preset=name)
        if name == "baseline":
            base.update(w_loc=0.0, w_glob=0.0, w_land=0.0, w_joint=0.0,
                        landmarks_enabled=False, warp_mode="none",
                        topology_enabled=False, reparam_enabled=False)
        elif name == "lean":
            base.update(w_glob=0.0, w_land=0.0, w_joint=0.0,
                        landmarks_enabled=False, warp_mode="none",
                        topology_enabled=False, reparam_enabled=False)
        elif name == "medium":
            base.update(w_glob=0.0, topology_enabled=False,
                        reparam_enabled=False)
        elif name != "full":
            raise ConfigError(f"unknown preset {name!r}")
        base.update(overrides)
        return RunConfig(**base)

    def enabled_terms(self) -> frozenset:
        terms = {"gradient", "stretch"}
        if self.w_loc:
            terms.add("local_color")
        if self.landmarks_enabled:
            terms.update({"landmarks", "coupling", "warp"})
        if self.w_glob:
            terms.add("global_color")
        if self.topology_enabled or self.reparam_enabled:
            terms.add("reparametrization")
        return frozenset(terms)

    def weights(self) -> Weights:
        return Weights(self.mu, self.lam, self.w_loc, self.w_glob,
                       self.w_land, self.w_joint, self.stretch_mode)

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")

    @staticmethod
    def from_file(path) -> "RunConfig":
        known = {f.name: f.type for f in fields(RunConfig)}
        casts = {"int": int, "float": float, "str": str,
                 "bool": lambda s: s.strip().lower() in ("1", "true", "yes")}
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in known:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = casts[known[key]](val)
        if "preset" in values:
            preset = values.pop("preset")
            return RunConfig.from_preset(preset, **values)
        return RunConfig(**values)


@dataclass
class FrameResult:
    frame_index: int
    curve: RotoCurve
    mask: RegionMask
    energy: EnergyBreakdown
    iou: float = None
    accuracy: float = None
    wall_time: float = 0.0
    iterations: int = 0
    flags: tuple = ()
    landmarks: tuple = ()  # (x, y) positions, for overlays

    def csv_row(self) -> str:
        iou = "" if self.iou is None else f"{self.iou:.6f}"
        acc = "" if self.accuracy is None else f"{self.accuracy:.6f}"
        return (f"{self.frame_index},{iou},{acc},{self.energy.total:.6f},"
                f"{self.energy.e_curve:.6f},{self.energy.e_land:.6f},"
                f"{self.energy.e_joint:.6f},{self.iterations},"
                f"{self.wall_time * 1000.0:.3f}")


CSV_HEADER = "frame,iou,accuracy,e_total,e_curve,e_land,e_joint,iters,ms"


@dataclass
class TrackerState:
    curve: RotoCurve
    prev_curve: RotoCurve
    pool: LandmarkPool
    global_model: FgBgModel
    local_models: list
    config: RunConfig
    frame_index: int
    geom: DeltaGeometry
    root: np.ndarray
    green: GreenField = None
    cost_maps: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    last_trace: np.ndarray = None  # energy trace of the latest alternate()

    def weights(self) -> Weights:
        return self.config.weights()

    def to_doc(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "curve": self.curve.vertices.tolist(),
            "prev_curve": self.prev_curve.vertices.tolist(),
            "root": list(map(float, self.root)),
            "pool": self.pool.to_dict(),
            "global_model": (self.global_model.to_dict()
                             if self.global_model else None),
            "local_models": [m.to_dict() for m in (self.local_models or [])],
            "flags": list(self.flags),
        }

    @staticmethod
    def from_doc(doc: dict, config: RunConfig) -> "TrackerState":
        globo = (FgBgModel.from_dict(doc["global_model"])
                 if doc.get("global_model") else None)
        locals_ = [FgBgModel.from_dict(d) for d in doc.get("local_models", [])]
        return TrackerState(
            curve=RotoCurve(np.array(doc["curve"], dtype=np.int64)),
            prev_curve=RotoCurve(np.array(doc["prev_curve"], dtype=np.int64)),
            pool=LandmarkPool.from_dict(doc["pool"]),
            global_model=globo,
            local_models=locals_ or None,
            config=config,
            frame_index=int(doc["frame_index"]),
            geom=DeltaGeometry(config.support_half_width),
            root=np.array(doc["root"], dtype=np.float64),
            flags=list(doc.get("flags", [])),
        )


def _seed_for(config: RunConfig, frame_index: int, purpose: int) -> int:
    return (config.seed * 1_000_003 + frame_index * 9_973 + purpose) % (2 ** 31)


def _region_samples(frame: Frame, mask_bool: np.ndarray, cap: int,
                    seed: int) -> np.ndarray:
    colors = frame.rgb[mask_bool]
    if len(colors) > cap:
        idx = np.random.default_rng(seed).choice(len(colors), size=cap,
                                                 replace=False)
        colors = colors[np.sort(idx)]
    return colors


def _needs_local(config: RunConfig) -> bool:
    return config.w_loc != 0.0 or config.topology_enabled


def _needs_global(config: RunConfig) -> bool:
    return config.w_glob != 0.0 or config.topology_enabled


def fit_local_models(frame: Frame, curve: RotoCurve, mask: RegionMask,
                     config: RunConfig, base_seed: int) -> list:
    models = []
    for n in range(len(curve)):
        sup = edge_support(curve, n, mask, config.support_half_width)
        fg_colors = (frame.rgb[sup.inside_pixels[:, 1], sup.inside_pixels[:, 0]]
                     if len(sup.inside_pixels) else np.empty((0, 3)))
        bg_colors = (frame.rgb[sup.outside_pixels[:, 1], sup.outside_pixels[:, 0]]
                     if len(sup.outside_pixels) else np.empty((0, 3)))
        if len(fg_colors) == 0:
            fg_colors = frame.rgb[mask.inside][:64]
        if len(bg_colors) == 0:
            bg_colors = frame.rgb[~mask.inside][:64]
        fg, _ = fit_gmm(fg_colors, config.k_local, seed=base_seed + 2 * n)
        bg, _ = fit_gmm(bg_colors, config.k_local, seed=base_seed + 2 * n + 1)
        models.append(FgBgModel(fg, bg))
    return models


def init_from_keyframe(frame: Frame, curve: RotoCurve,
                       config: RunConfig) -> TrackerState:
    """Fit all appearance models and detect the landmark pool on the keyframe."""
    if not curve.in_bounds(frame.width, frame.height):
        raise CurveError("initial curve out of image bounds")
    if not curve.is_simple():
        raise CurveError("initial curve self-intersects")
    curve = curve.ensure_clockwise()
    mask = rasterize_region(curve, frame.width, frame.height)
    if mask.area < 16 or mask.area > frame.width * frame.height - 16:
        raise CurveError("initial region too small to fit appearance models")
    flags = []
    global_model = None
    if _needs_global(config):
        fg = _region_samples(frame, mask.inside, config.max_region_samples,
                             _seed_for(config, 0, 1))
        bg = _region_samples(frame, ~mask.inside, config.max_region_samples,
                             _seed_for(config, 0, 2))
        global_model = FgBgModel(
            fit_gmm(fg, config.k_global, seed=_seed_for(config, 0, 3))[0],
            fit_gmm(bg, config.k_global, seed=_seed_for(config, 0, 4))[0])
    local_models = None
    if _needs_local(config):
        local_models = fit_local_models(frame, curve, mask, config,
                                        _seed_for(config, 0, 5))
    pool = LandmarkPool(capacity=config.pool_capacity)
    if config.landmarks_enabled:
        pool = cull_and_repopulate(pool, frame, mask, curve,
                                   config.psr_threshold,
                                   config.min_separation, config.k_pair)
        if len(pool) == 0:
            flags.append("no_landmarks")
    return TrackerState(
        curve=curve, prev_curve=curve, pool=pool, global_model=global_model,
        local_models=local_models, config=config, frame_index=0,
        geom=DeltaGeometry(config.support_half_width), root=pool.prev_root,
        flags=flags)


def compute_metrics(pred_mask: RegionMask, gt_mask: RegionMask):
    """(accuracy, IoU); both masks empty counts as IoU 1 by convention."""
    if (pred_mask.width, pred_mask.height) != (gt_mask.width, gt_mask.height):
        raise ValueError("mask dimensions differ")
    p = pred_mask.inside
    g = gt_mask.inside
    accuracy = float(np.count_nonzero(p == g)) / p.size
    union = np.count_nonzero(p | g)
    if union == 0:
        return accuracy, 1.0
    return accuracy, float(np.count_nonzero(p & g)) / union


def _match_landmarks(state: TrackerState, frame: Frame):
    """Stage A: independent correlation matching around previous positions."""
    matched = {}
    for lm in state.pool.landmarks:
        cmap = match_cost_map(lm, frame, lm.prev_position,
                              state.config.search_side)
        lm.psr = cmap.psr
        matched[lm.id] = cmap.peak.copy()
    return matched


def _sane_transform(t: "warp_mod.SimilarityTransform") -> bool:
    # per-frame motion bounds; a minimal-sample fit through bad matches
    # can otherwise implode or explode the curve
    return 0.85 <= t.scale <= 1.2 and abs(t.rotation) <= 0.25


def _translation_fallback(prev: np.ndarray, curr: np.ndarray):
    med = np.median(curr - prev, axis=0)
    return warp_mod.SimilarityTransform(1.0, 0.0, med)


def _warp_stage(state: TrackerState, frame: Frame, matched: dict):
    """Pre-warp the previous curve from landmark correspondences."""
    config = state.config
    curve = state.prev_curve
    transform = None
    if config.warp_mode == "none" or len(state.pool) == 0 or not matched:
        return curve, transform
    pool_lms = [lm for lm in state.pool.landmarks if lm.id in matched]
    # several landmarks matching one location means mismatches to look-alike
    # features: keep only the strongest of each cluster
    pool_lms.sort(key=lambda lm: -lm.psr)
    deduped = []
    for lm in pool_lms:
        p = matched[lm.id]
        if all(np.hypot(*(p - matched[o.id])) > 4.0 for o in deduped):
            deduped.append(lm)
    pool_lms = deduped
    trusted = [lm for lm in pool_lms if lm.psr >= config.psr_threshold]
    use = trusted if len(trusted) >= 3 else pool_lms
    prev = np.array([lm.prev_position for lm in use], dtype=np.float64)
    curr = np.array([matched[lm.id] for lm in use], dtype=np.float64)
    if config.warp_mode == "rigid_ransac":
        transform = None
        if len(use) >= 3:
            try:
                cand, inliers = warp_mod.estimate_similarity_ransac(
                    prev, curr,
                    seed=_seed_for(config, state.frame_index + 1, 7),
                    inlier_tol=config.inlier_tol,
                    max_trials=config.ransac_trials)
                if inliers.sum() >= 3 and _sane_transform(cand):
                    transform = cand
            except warp_mod.WarpError:
                pass
        if transform is None:
            # median displacement of the most trustworthy correspondences
            if len(trusted) >= 2:
                prev = np.array([lm.prev_position for lm in trusted],
                                dtype=np.float64)
                curr = np.array([matched[lm.id] for lm in trusted],
                                dtype=np.float64)
            transform = _translation_fallback(prev, curr)
            state.flags.append("warp_translation_fallback")
        try:
            curve = warp_mod.warp_curve(curve, transform, frame.width,
                                        frame.height)
        except CurveError:
            state.flags.append("warp_failed")
            curve, transform = state.prev_curve, None
    elif config.warp_mode == "node_projection":
        good = [lm for lm in pool_lms if lm.psr >= config.psr_threshold]
        moves: dict = {}
        for lm in good:
            d = matched[lm.id].astype(np.float64) - lm.prev_position
            for nidx, _ in lm.pairings:
                moves.setdefault(nidx, []).append(d)
        try:
            curve = warp_mod.warp_by_node_projection(curve, moves, frame.width,
                                                     frame.height)
        except CurveError:
            state.flags.append("warp_failed")
            curve = state.prev_curve
    if not curve.is_simple():
        # integer rounding collisions: retry with the translation part only
        state.flags.append("warp_not_simple")
        curve = state.prev_curve
        if transform is not None:
            try:
                fallback = warp_mod.SimilarityTransform(
                    1.0, 0.0, np.round(transform.translation))
                cand = warp_mod.warp_curve(curve, fallback, frame.width,
                                           frame.height)
                if cand.is_simple():
                    curve, transform = cand, fallback
            except CurveError:
                pass
    return curve, transform


def _remap_pairings(pool: LandmarkPool, old_curve: RotoCurve,
                    new_curve: RotoCurve) -> None:
    """Point each pairing at the nearest new vertex, keeping the original mu."""
    for lm in pool.landmarks:
        fresh = []
        for nidx, mu in lm.pairings:
            old_pos = old_curve.vertices[nidx]
            d = np.hypot(*(new_curve.vertices - old_pos).T)
            fresh.append((int(np.argmin(d)), mu))
        lm.pairings = fresh


def _fit_one_local_model(frame: Frame, curve: RotoCurve, mask: RegionMask,
                         n: int, config: RunConfig, seed: int) -> FgBgModel:
    sup = edge_support(curve, n, mask, config.support_half_width)
    fg_colors = (frame.rgb[sup.inside_pixels[:, 1], sup.inside_pixels[:, 0]]
                 if len(sup.inside_pixels) else frame.rgb[mask.inside][:64])
    bg_colors = (frame.rgb[sup.outside_pixels[:, 1], sup.outside_pixels[:, 0]]
                 if len(sup.outside_pixels) else frame.rgb[~mask.inside][:64])
    return FgBgModel(fit_gmm(fg_colors, config.k_local, seed=seed)[0],
                     fit_gmm(bg_colors, config.k_local, seed=seed + 1)[0])


def _remap_local_models(old_curve: RotoCurve, old_models: list,
                        new_curve: RotoCurve, frame: Frame, mask: RegionMask,
                        config: RunConfig, seed: int) -> list:
    """New edges adopt the nearest old edge's model, or fit fresh if far."""
    old_mid = np.array([(old_curve.edge(n)[0] + old_curve.edge(n)[1]) / 2.0
                        for n in range(len(old_curve))])
    out = []
    for n in range(len(new_curve)):
        a, b = new_curve.edge(n)
        mid = (a + b) / 2.0
        d = np.hypot(*(old_mid - mid).T)
        j = int(np.argmin(d))
        if d[j] <= 2.0 * config.support_half_width:
            out.append(old_models[j])
        else:
            out.append(_fit_one_local_model(frame, new_curve, mask, n, config,
                                            seed + 2 * n))
    return out


def total_energy(state: TrackerState, frame: Frame) -> EnergyBreakdown:
    """Joint energy of the state's configuration on a frame."""
    green = state.green
    if green is None and _needs_field(state.config):
        green = build_green_field(frame, state.global_model)
    return evaluate_energy(frame, state.curve, state.pool, state.local_models,
                           green, state.cost_maps, state.root,
                           state.weights(), state.geom)


def _needs_field(config: RunConfig) -> bool:
    return config.w_glob != 0.0


def propose_and_accept(state: TrackerState, frame: Frame,
                       curve: RotoCurve = None):
    """Graph-cut proposal, per-component edits accepted on energy decrease.

    Returns (curve, local_models, accepted). Never raises the total energy
    and never emits a non-simple curve; rejected edits leave the state alone.
    """
    if curve is None:
        curve = state.curve
    config = state.config
    mask = rasterize_region(curve, frame.width, frame.height)
    w = config.support_half_width
    proposal = segmentation_proposal(
        frame, curve, mask, state.local_models, state.global_model,
        band=config.band_factor * w, dilation=int(config.dilation_factor * w),
        gamma=config.gamma)
    xor = proposal ^ mask.inside
    labels, count = ndimage.label(xor)
    if count == 0:
        return curve, state.local_models, False
    areas = ndimage.sum_labels(np.ones_like(labels), labels,
                               np.arange(1, count + 1))
    threshold = max(config.area_threshold_frac * mask.area, 4.0)
    order = np.argsort(-areas)
    cur_curve = curve
    cur_models = state.local_models
    cur_mask = mask
    # base through the same evaluator the candidates use
    cur_energy = evaluate_energy(
        frame, curve, state.pool, state.local_models, state.green,
        state.cost_maps, state.root, state.weights(), state.geom).total
    accepted = False
    tried = 0
    for k in order:
        if areas[k] < threshold or tried >= config.max_proposals:
            break
        tried += 1
        comp = labels == (k + 1)
        cand_region = cur_mask.inside ^ comp
        if cand_region.sum() < 16:
            continue
        try:
            cand_curve = region_to_curve(cand_region, config.resample_spacing)
            cand_mask = rasterize_region(cand_curve, frame.width, frame.height)
        except CurveError:
            continue
        seed = _seed_for(config, state.frame_index + 1, 11)
        cand_models = _remap_local_models(cur_curve, cur_models, cand_curve,
                                          frame, cand_mask, config, seed)
        cand_pool = copy.deepcopy(state.pool)
        _remap_pairings(cand_pool, cur_curve, cand_curve)
        cand_energy = evaluate_energy(
            frame, cand_curve, cand_pool, cand_models, state.green,
            state.cost_maps, state.root, state.weights(), state.geom).total
        if cand_energy < cur_energy - 1e-9:
            cur_curve = cand_curve
            cur_models = cand_models
            cur_mask = cand_mask
            cur_energy = cand_energy
            for lm, cand_lm in zip(state.pool.landmarks, cand_pool.landmarks):
                lm.pairings = cand_lm.pairings
            accepted = True
    return cur_curve, cur_models, accepted


def _adapt_models(state: TrackerState, frame: Frame, curve: RotoCurve,
                  mask: RegionMask) -> None:
    config = state.config
    if not config.adapt_every_frame:
        return
    alpha = config.adapt_alpha
    seed = _seed_for(config, state.frame_index + 1, 13)
    if state.global_model is not None:
        fg = _region_samples(frame, mask.inside, 400, seed)
        bg = _region_samples(frame, ~mask.inside, 400, seed + 1)
        state.global_model = FgBgModel(
            adapt_gmm(state.global_model.fg, fg, alpha) if len(fg) else state.global_model.fg,
            adapt_gmm(state.global_model.bg, bg, alpha) if len(bg) else state.global_model.bg)
    if state.local_models is not None:
        rng = np.random.default_rng(seed + 2)
        cap = 32  # per-sample updates are sequential; keep them cheap
        fresh = []
        for n in range(len(curve)):
            sup = edge_support(curve, n, mask, config.support_half_width)
            model = state.local_models[n]
            fg, bg = model.fg, model.bg
            for pixels, side in ((sup.inside_pixels, "fg"),
                                 (sup.outside_pixels, "bg")):
                if len(pixels) == 0:
                    continue
                if len(pixels) > cap:
                    idx = np.sort(rng.choice(len(pixels), cap, replace=False))
                    pixels = pixels[idx]
                colors = frame.rgb[pixels[:, 1], pixels[:, 0]]
                if side == "fg":
                    fg = adapt_gmm(fg, colors, alpha)
                else:
                    bg = adapt_gmm(bg, colors, alpha)
            fresh.append(FgBgModel(fg, bg))
        state.local_models = fresh


def step(state: TrackerState, frame: Frame, gt_mask: RegionMask = None):
    """Advance the tracker by one frame. Returns (state, FrameResult)."""
    t0 = time.perf_counter()
    config = state.config
    state.flags = []
    matched = _match_landmarks(state, frame) if len(state.pool) else {}
    curve, transform = _warp_stage(state, frame, matched)
    if len(curve) != len(state.prev_curve):
        # integer rounding in the warp can merge vertices; keep models and
        # pairings aligned with the surviving ones
        if state.local_models is not None:
            mask_w = rasterize_region(curve, frame.width, frame.height)
            state.local_models = _remap_local_models(
                state.prev_curve, state.local_models, curve, frame, mask_w,
                config, _seed_for(config, state.frame_index + 1, 19))
        _remap_pairings(state.pool, state.prev_curve, curve)
    # position landmarks for inference: matched if trusted, else warped
    for lm in state.pool.landmarks:
        if lm.psr >= config.psr_threshold:
            lm.position = matched[lm.id].copy()
        else:
            pos = lm.prev_position.astype(np.float64)
            if transform is not None:
                pos = transform.apply(pos)[0]
            lm.position = np.array(
                [int(np.clip(round(pos[0]), 0, frame.width - 1)),
                 int(np.clip(round(pos[1]), 0, frame.height - 1))],
                dtype=np.int64)
    state.cost_maps = {}
    for lm in state.pool.landmarks:
        cmap = match_cost_map(lm, frame, lm.position, config.search_side)
        state.cost_maps[lm.id] = cmap
        lm.psr = cmap.psr
    state.green = (build_green_field(frame, state.global_model)
                   if _needs_field(config) else None)
    window = MoveWindow(config.move_radius)
    curve, root, trace, iterations, stuck = alternate(
        frame, curve, state.pool, state.local_models, state.green,
        state.cost_maps, state.weights(), state.geom, window,
        max_iters=config.max_iters, tol=None,
        root=state.pool.prev_root if len(state.pool) else np.zeros(2),
        root_radius=config.root_radius)
    state.root = root
    state.last_trace = trace
    if stuck:
        state.flags.append("contour_stuck")
    if config.topology_enabled:
        curve, models, accepted = propose_and_accept(state, frame, curve)
        if accepted:
            state.local_models = models
            state.flags.append("topology_accepted")
    if config.reparam_enabled:
        v = curve.vertices.astype(np.float64)
        seg = np.hypot(*(np.roll(v, -1, axis=0) - v).T)
        if seg.max() > config.edge_ratio_limit * max(seg.min(), 1e-9):
            try:
                resampled = resample_curve(curve, config.resample_spacing)
                mask_now = rasterize_region(resampled, frame.width, frame.height)
                state.local_models = (
                    _remap_local_models(curve, state.local_models, resampled,
                                        frame, mask_now, config,
                                        _seed_for(config, state.frame_index + 1, 17))
                    if state.local_models is not None else None)
                _remap_pairings(state.pool, curve, resampled)
                curve = resampled
                state.flags.append("resampled")
            except CurveError:
                state.flags.append("resample_failed")
    try:
        mask = rasterize_region(curve, frame.width, frame.height)
    except CurveError:
        state.flags.append("lost_degenerate")
        curve = state.prev_curve
        mask = rasterize_region(curve, frame.width, frame.height)
    state.curve = curve
    _adapt_models(state, frame, curve, mask)
    if config.landmarks_enabled:
        state.pool = cull_and_repopulate(
            state.pool, frame, mask, curve, config.psr_threshold,
            config.min_separation, config.k_pair)
    breakdown = total_energy(state, frame)
    state.pool.advance()
    state.prev_curve = curve
    state.frame_index += 1
    accuracy = iou = None
    if gt_mask is not None:
        accuracy, iou = compute_metrics(mask, gt_mask)
    result = FrameResult(state.frame_index, curve, mask, breakdown, iou,
                         accuracy, time.perf_counter() - t0, iterations,
                         tuple(state.flags),
                         tuple((int(lm.position[0]), int(lm.position[1]))
                               for lm in state.pool.landmarks))
    return state, result


def track_sequence(frames, init_curve: RotoCurve, config: RunConfig,
                   gt_masks=None, progress=None, checkpoint_dir=None,
                   start_index: int = 0):
    """Initialize on frames[0] and step through the rest.

    `frames` is a list of Frame objects; `gt_masks` an optional parallel list
    of RegionMask (entries may be None). Returns the list of FrameResult for
    frames[1:], numbered from start_index + 1.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to track")
    state = init_from_keyframe(frames[0], init_curve, config)
    state.frame_index = start_index
    results = []
    for k, frame in enumerate(frames[1:], start=1):
        gt = gt_masks[k] if gt_masks is not None else None
        state, result = step(state, frame, gt)
        results.append(result)
        if checkpoint_dir is not None:
            path = f"{checkpoint_dir}/state_{result.frame_index:05d}.json"
            with open(path, "w") as fh:
                json.dump(state.to_doc(), fh)
        if progress is not None:
            progress(result)
    return results

"""Color Gaussian mixtures: EM fitting, stable log densities, online adaptation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VARIANCE_FLOOR = 1e-4
LN_FLOOR = -20.0
_LOG_2PI = float(np.log(2.0 * np.pi))


class ModelError(ValueError):
    """Raised for unusable sample sets or invalid adaptation rates."""


@dataclass(frozen=True)
class Gmm:
    """Diagonal-covariance color mixture. Immutable; adapt() returns a new model."""

    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, 3)
    covariances: np.ndarray  # (K, 3) per-channel variances

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.covariances, dtype=np.float64)
        assert w.ndim == 1 and m.shape == (w.size, 3) and c.shape == m.shape
        for a in (w, m, c):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covariances", c)

    @property
    def k(self) -> int:
        return self.weights.size

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "covariances": self.covariances.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Gmm":
        return Gmm(np.array(d["weights"]), np.array(d["means"]),
                   np.array(d["covariances"]))


@dataclass(frozen=True)
class FgBgModel:
    """Paired foreground/background mixtures (one object-wide, or one per edge)."""

    fg: Gmm
    bg: Gmm

    def to_dict(self) -> dict:
        return {"fg": self.fg.to_dict(), "bg": self.bg.to_dict()}

    @staticmethod
    def from_dict(d: dict) -> "FgBgModel":
        return FgBgModel(Gmm.from_dict(d["fg"]), Gmm.from_dict(d["bg"]))


def _component_log_pdf(model: Gmm, colors: np.ndarray) -> np.ndarray:
    """(M, K) per-component log densities."""
    diff = colors[:, None, :] - model.means[None, :, :]
    cov = model.covariances[None, :, :]
    return -0.5 * np.sum(diff * diff / cov + np.log(cov) + _LOG_2PI, axis=2)


def log_density_many(model: Gmm, colors: np.ndarray) -> np.ndarray:
    """ln sum_k w_k N(c; mu_k, cov_k), log-sum-exp stable, clamped at LN_FLOOR."""
    colors = np.atleast_2d(np.asarray(colors, dtype=np.float64))
    logp = _component_log_pdf(model, colors) + np.log(model.weights)[None, :]
    peak = np.max(logp, axis=1)
    out = peak + np.log(np.sum(np.exp(logp - peak[:, None]), axis=1))
    return np.maximum(out, LN_FLOOR)


def log_density(model: Gmm, color) -> float:
    return float(log_density_many(model, np.asarray(color, dtype=np.float64))[0])


def _kmeanspp_centers(colors: np.ndarray, k: int, rng: np.random.Generator):
    centers = [colors[rng.integers(len(colors))]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((colors - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(colors[rng.integers(len(colors))])
            continue
        centers.append(colors[rng.choice(len(colors), p=d2 / total)])
    return np.array(centers)


def _loglik(model: Gmm, colors: np.ndarray) -> float:
    return float(np.sum(log_density_many(model, colors)))


def fit_gmm(colors: np.ndarray, k: int, seed: int,
            max_iters: int = 100, tol_per_sample: float = 1e-6):
    """EM from seeded k-means++ starts. Returns (Gmm, per-iteration log-lik trace).

    Falls back to k' = len(colors) when there are fewer samples than
    components. The trace is non-decreasing: an iteration whose variance
    flooring would lower the objective is reverted and iteration stops.
    """
    colors = np.atleast_2d(np.asarray(colors, dtype=np.float64))
    m = colors.shape[0]
    if m == 0:
        raise ModelError("cannot fit a mixture to an empty sample set")
    k = min(k, m)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp_centers(colors, k, rng)
    d2 = np.sum((colors[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    weights = np.empty(k)
    means = np.empty((k, 3))
    covs = np.empty((k, 3))
    for j in range(k):
        sel = colors[assign == j]
        if len(sel) == 0:
            sel = centers[j][None, :]
        weights[j] = max(len(sel), 1)
        means[j] = sel.mean(axis=0)
        covs[j] = np.maximum(sel.var(axis=0), VARIANCE_FLOOR)
    weights /= weights.sum()
    model = Gmm(weights, means, covs)
    trace = [_loglik(model, colors)]
    for _ in range(max_iters):
        logp = _component_log_pdf(model, colors) + np.log(model.weights)[None, :]
        peak = np.max(logp, axis=1, keepdims=True)
        resp = np.exp(logp - peak)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        nk_safe = np.maximum(nk, 1e-12)
        means = (resp.T @ colors) / nk_safe[:, None]
        diff = colors[:, None, :] - means[None, :, :]
        covs = np.einsum("mk,mkc->kc", resp, diff * diff) / nk_safe[:, None]
        covs = np.maximum(covs, VARIANCE_FLOOR)
        weights = nk / nk.sum()
        candidate = Gmm(np.maximum(weights, 1e-12) / np.maximum(weights, 1e-12).sum(),
                        means, covs)
        ll = _loglik(candidate, colors)
        if ll < trace[-1] - 1e-12:
            break  # flooring broke monotonicity; keep the previous model
        model = candidate
        gain = ll - trace[-1]
        trace.append(ll)
        if gain < tol_per_sample * m:
            break
    return model, np.array(trace)


def adapt_gmm(model: Gmm, samples: np.ndarray, alpha: float,
              new_component_variance: float = 0.05) -> Gmm:
    """Online update in the Stauffer-Grimson style, one sample at a time.

    A sample within 2.5 sigma (diagonal Mahalanobis) of its nearest component
    reinforces it; otherwise the lowest-weight component is blended toward
    (sample, high variance) at rate alpha, so alpha -> 0 is an exact no-op.
    """
    if not (0.0 < alpha < 1.0):
        raise ModelError(f"adaptation rate must be in (0, 1), got {alpha}")
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    weights = model.weights.copy()
    means = model.means.copy()
    covs = model.covariances.copy()
    for x in samples:
        d2 = np.sum((x - means) ** 2 / covs, axis=1)
        j = int(np.argmin(d2))
        if d2[j] <= 2.5 ** 2:
            logp = -0.5 * np.sum((x - means) ** 2 / covs
                                 + np.log(covs) + _LOG_2PI, axis=1) + np.log(weights)
            logp -= logp.max()
            post = np.exp(logp)
            rho = alpha * float(post[j] / post.sum())
            weights = (1.0 - alpha) * weights
            weights[j] += alpha
            means[j] = (1.0 - rho) * means[j] + rho * x
            means_j = means[j]
            covs[j] = (1.0 - rho) * covs[j] + rho * (x - means_j) ** 2
        else:
            j = int(np.argmin(weights))
            weights = (1.0 - alpha) * weights
            weights[j] += alpha
            means[j] = (1.0 - alpha) * means[j] + alpha * x
            covs[j] = (1.0 - alpha) * covs[j] + alpha * new_component_variance
        covs = np.maximum(covs, VARIANCE_FLOOR)
        weights = weights / weights.sum()
    return Gmm(weights, means, covs)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rototrack.appearance import (
    LN_FLOOR,
    VARIANCE_FLOOR,
    Gmm,
    ModelError,
    adapt_gmm,
    fit_gmm,
    log_density,
    log_density_many,
)

rng = np.random.default_rng(77)


def test_fit_constant_color():
    colors = np.tile([0.3, 0.6, 0.9], (200, 1))
    model, trace = fit_gmm(colors, 2, seed=0)
    for mean in model.means:
        assert np.allclose(mean, [0.3, 0.6, 0.9], atol=1e-9)
    assert np.all(model.covariances == VARIANCE_FLOOR)
    assert np.all(np.diff(trace) >= -1e-9)


def test_fit_recovers_two_clusters():
    r = np.random.default_rng(123)
    c1 = np.clip(r.normal([0.2, 0.2, 0.2], 0.01, size=(100, 3)), 0, 1)
    c2 = np.clip(r.normal([0.8, 0.8, 0.8], 0.01, size=(100, 3)), 0, 1)
    model, _ = fit_gmm(np.vstack([c1, c2]), 2, seed=1)
    w = np.sort(model.weights)
    assert np.allclose(w, [0.5, 0.5], atol=0.05)
    means = model.means[np.argsort(model.means[:, 0])]
    assert np.allclose(means[0], c1.mean(axis=0), atol=0.02)
    assert np.allclose(means[1], c2.mean(axis=0), atol=0.02)


def test_fit_empty_input_raises():
    with pytest.raises(ModelError):
        fit_gmm(np.empty((0, 3)), 2, seed=0)


def test_fit_fewer_samples_than_components():
    colors = np.array([[0.1, 0.2, 0.3], [0.7, 0.8, 0.9]])
    model, _ = fit_gmm(colors, 5, seed=0)
    assert model.k == 2


def test_fit_deterministic_given_seed():
    colors = rng.random((120, 3))
    m1, t1 = fit_gmm(colors, 3, seed=42)
    m2, t2 = fit_gmm(colors, 3, seed=42)
    assert np.array_equal(m1.weights, m2.weights)
    assert np.array_equal(m1.means, m2.means)
    assert np.array_equal(m1.covariances, m2.covariances)
    assert np.array_equal(t1, t2)


def test_log_density_at_mean_is_norm_constant():
    v = 0.04
    model = Gmm(np.array([1.0]), np.array([[0.5, 0.5, 0.5]]),
                np.array([[v, v, v]]))
    expected = -0.5 * 3 * np.log(2 * np.pi * v)
    assert log_density(model, [0.5, 0.5, 0.5]) == pytest.approx(expected, abs=1e-12)


def test_log_density_clamped_below():
    model = Gmm(np.array([1.0]), np.array([[0.0, 0.0, 0.0]]),
                np.array([[VARIANCE_FLOOR] * 3]))
    assert log_density(model, [1.0, 1.0, 1.0]) == LN_FLOOR


def test_log_density_matches_naive_sum():
    r = np.random.default_rng(5)
    weights = r.dirichlet(np.ones(3))
    means = r.random((3, 3))
    covs = r.uniform(0.01, 0.2, size=(3, 3))
    model = Gmm(weights, means, covs)
    colors = r.random((50, 3))
    got = log_density_many(model, colors)
    for i, c in enumerate(colors):
        dens = 0.0
        for k in range(3):
            norm = np.prod(1.0 / np.sqrt(2 * np.pi * covs[k]))
            expo = np.exp(-0.5 * np.sum((c - means[k]) ** 2 / covs[k]))
            dens += weights[k] * norm * expo
        assert got[i] == pytest.approx(np.log(dens), abs=1e-9)


def test_log_density_invariant_under_permutation():
    r = np.random.default_rng(6)
    weights = r.dirichlet(np.ones(4))
    means = r.random((4, 3))
    covs = r.uniform(0.01, 0.1, size=(4, 3))
    perm = np.array([2, 0, 3, 1])
    m1 = Gmm(weights, means, covs)
    m2 = Gmm(weights[perm], means[perm], covs[perm])
    colors = r.random((20, 3))
    assert np.allclose(log_density_many(m1, colors),
                       log_density_many(m2, colors), atol=1e-12)


def _random_model(seed):
    r = np.random.default_rng(seed)
    return Gmm(r.dirichlet(np.ones(3)), r.random((3, 3)),
               r.uniform(0.005, 0.05, size=(3, 3)))


def test_adapt_zero_rate_fixed_point():
    model = _random_model(7)
    samples = np.random.default_rng(8).random((30, 3))
    out = adapt_gmm(model, samples, alpha=1e-12)
    assert np.allclose(out.weights, model.weights, atol=1e-9)
    assert np.allclose(out.means, model.means, atol=1e-9)
    assert np.allclose(out.covariances, model.covariances, atol=1e-9)


def test_adapt_absorbs_new_color():
    model = Gmm(np.array([0.5, 0.5]),
                np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]]),
                np.full((2, 3), 0.001))
    new_color = np.array([0.9, 0.1, 0.5])
    out = model
    for _ in range(500):
        out = adapt_gmm(out, new_color[None, :], alpha=0.1)
    nearest = np.min(np.linalg.norm(out.means - new_color, axis=1))
    assert nearest < 0.05


def test_adapt_weights_sum_to_one():
    model = _random_model(9)
    samples = np.random.default_rng(10).random((100, 3))
    out = adapt_gmm(model, samples, alpha=0.3)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_adapt_rejects_bad_alpha():
    model = _random_model(11)
    with pytest.raises(ModelError):
        adapt_gmm(model, np.zeros((1, 3)), alpha=1.5)
    with pytest.raises(ModelError):
        adapt_gmm(model, np.zeros((1, 3)), alpha=0.0)


@given(st.integers(0, 10_000), st.floats(0.01, 0.9),
       st.integers(1, 40))
@settings(max_examples=60, deadline=None)
def test_adapt_preserves_invariants_on_random_streams(seed, alpha, count):
    r = np.random.default_rng(seed)
    model = _random_model(seed + 1)
    samples = r.random((count, 3))
    out = adapt_gmm(model, samples, alpha=alpha)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(out.weights >= 0)
    assert np.all(out.covariances >= VARIANCE_FLOOR)
    assert np.isfinite(log_density_many(out, r.random((5, 3)))).all()


def test_em_trace_monotone_on_random_fits():
    for seed in range(20):
        r = np.random.default_rng(seed)
        colors = r.random((int(r.integers(20, 200)), 3))
        _, trace = fit_gmm(colors, 5, seed=seed)
        assert np.all(np.diff(trace) >= -1e-9)


def test_serialization_roundtrip():
    model = _random_model(12)
    clone = Gmm.from_dict(model.to_dict())
    assert np.array_equal(clone.weights, model.weights)
    assert np.array_equal(clone.means, model.means)
    assert np.array_equal(clone.covariances, model.covariances)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stream_rem.covariates import EffectKind as K
from stream_rem.exceptions import DimensionMismatch, UnknownEffect
from stream_rem.likelihood import (
    EffectConfig,
    ModelFit,
    bind_effects,
    compute_centering,
    delta_block,
    effect_curve,
    evaluate,
    grad_neg_log_pl,
    information_criteria,
    n_params,
    neg_log_pl,
    offsets,
)

EFFECTS = [EffectConfig(K.TIME_LAG, df=6), EffectConfig(K.TEXTUAL_SIMILARITY, "linear")]


def test_zero_theta_is_b_log2():
    delta = np.random.default_rng(0).normal(size=(17, 4))
    assert neg_log_pl(np.zeros(4), delta) == pytest.approx(17 * math.log(2), rel=1e-15)


def test_zero_row_contributes_log2():
    delta = np.zeros((1, 3))
    for theta in ([1, 2, 3], [-50, 0, 7]):
        assert neg_log_pl(theta, delta) == pytest.approx(math.log(2))


def test_eta_three():
    assert neg_log_pl([3.0], [[1.0]]) == pytest.approx(0.048587, abs=1e-6)
    assert neg_log_pl([3.0], [[1.0]]) == pytest.approx(math.log1p(math.exp(-3)), rel=1e-15)


def test_extreme_eta_is_finite():
    assert neg_log_pl([1.0], [[1e4]]) == 0.0
    assert neg_log_pl([1.0], [[-1e4]]) == pytest.approx(1e4)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        neg_log_pl(np.zeros(3), np.zeros((2, 4)))
    with pytest.raises(DimensionMismatch):
        grad_neg_log_pl(np.zeros(3), np.zeros((2, 4)))


def test_gradient_examples():
    assert np.all(grad_neg_log_pl([0.4, -1.0], np.zeros((5, 2))) == 0)
    delta = np.random.default_rng(1).normal(size=(9, 3))
    np.testing.assert_allclose(grad_neg_log_pl(np.zeros(3), delta), -0.5 * delta.sum(axis=0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 8))
    delta = rng.normal(size=(int(rng.integers(1, 50)), p))
    theta = rng.normal(size=p)
    g = grad_neg_log_pl(theta, delta)
    h = 1e-5
    fd = np.array([
        (neg_log_pl(theta + h * e, delta) - neg_log_pl(theta - h * e, delta)) / (2 * h) for e in np.eye(p)
    ])
    assert np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), 1e-3) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_convexity(seed, lam):
    rng = np.random.default_rng(seed)
    delta = rng.normal(size=(30, 4)) * 3
    a, b = rng.normal(size=4) * 2, rng.normal(size=4) * 2
    lhs = lam * neg_log_pl(a, delta) + (1 - lam) * neg_log_pl(b, delta)
    assert lhs >= neg_log_pl(lam * a + (1 - lam) * b, delta) - 1e-10


def test_spline_blocks_have_zero_row_sums(cc_small):
    eff = bind_effects(EFFECTS, cc_small)
    d = delta_block(eff, cc_small)
    np.testing.assert_allclose(d[:, :6].sum(axis=1), 0, atol=1e-12)


def test_gauge_invariance(cc_small):
    eff = bind_effects(EFFECTS, cc_small)
    theta = np.random.default_rng(3).normal(size=n_params(eff))
    shifted = theta.copy()
    shifted[:6] += 2.5
    a = evaluate(theta, eff, cc_small, grad=False)
    b = evaluate(shifted, eff, cc_small, grad=False)
    assert a == pytest.approx(b, rel=1e-12)


def test_evaluate_matches_direct_and_is_worker_free(cc_small):
    eff = bind_effects(EFFECTS, cc_small)
    theta = np.random.default_rng(4).normal(size=n_params(eff)) * 0.3
    d = delta_block(eff, cc_small)
    nll, g = evaluate(theta, eff, cc_small, chunk=100)
    assert nll == pytest.approx(neg_log_pl(theta, d), rel=1e-12)
    np.testing.assert_allclose(g, grad_neg_log_pl(theta, d), rtol=1e-10, atol=1e-10)
    for w in (2, 4):
        nll_w, g_w = evaluate(theta, eff, cc_small, chunk=100, workers=w)
        assert nll_w == nll
        assert np.array_equal(g_w, g)


def test_bind_domain(cc_small):
    (lag, sim) = bind_effects(EFFECTS, cc_small)
    pooled = np.concatenate([cc_small.case[:, 0], cc_small.control[:, 0]])
    assert lag.spline.lo == pooled.min() and lag.spline.hi == pooled.max()
    assert sim.spline is None and sim.n_coef == 1
    assert list(offsets([lag, sim])) == [0, 6, 7]


def test_information_criteria():
    aic, bic = information_criteria(24, 100.0, round(math.exp(10)))
    assert aic == 248
    assert bic == pytest.approx(440, abs=1e-3)
    assert information_criteria(np.zeros(24), 100.0, 22026)[0] == 248
    assert information_criteria(0, 7.5, 10) == (15.0, 15.0)


def make_fit(cc, theta):
    eff = bind_effects(EFFECTS, cc)
    theta = np.asarray(theta, dtype=float)
    nll = evaluate(theta, eff, cc, grad=False)
    aic, bic = information_criteria(theta, nll, len(cc))
    return ModelFit(eff, theta, compute_centering(eff, theta, cc), nll, aic, bic, len(cc))


def test_curve_zero_and_constant(cc_small):
    grid = np.linspace(0, 3000, 50)
    assert np.all(effect_curve(make_fit(cc_small, np.zeros(7)), K.TIME_LAG, grid) == 0)
    const = np.r_[np.full(6, 1.7), 0.0]
    np.testing.assert_allclose(effect_curve(make_fit(cc_small, const), K.TIME_LAG, grid), 0, atol=1e-12)
    with pytest.raises(UnknownEffect):
        effect_curve(make_fit(cc_small, const), K.IPC_JACCARD, grid)


def test_centering_mean_zero(cc_small):
    theta = np.random.default_rng(5).normal(size=7)
    fit = make_fit(cc_small, theta)
    pooled = np.concatenate([cc_small.case[:, 0], cc_small.control[:, 0]])
    assert abs(effect_curve(fit, K.TIME_LAG, pooled).mean()) < 1e-12


def test_fit_json_round_trip(tmp_path, cc_small):
    fit = make_fit(cc_small, np.random.default_rng(6).normal(size=7))
    fit.save(tmp_path / "fit.json")
    again = ModelFit.load(tmp_path / "fit.json")
    grid = np.linspace(0, 5000, 33)
    for k in (K.TIME_LAG, K.TEXTUAL_SIMILARITY):
        assert np.array_equal(effect_curve(again, k, grid), effect_curve(fit, k, grid))
    assert again.nll == fit.nll and again.aic == fit.aic

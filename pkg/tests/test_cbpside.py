import math

import numpy as np
import pytest

from pmkit.core import apple_tasting, encode_feedback, label_efficient, observe
from pmkit.environments import LinearPmEnv
from pmkit.strategies import CBPside, RandomizationConfig
from pmkit.strategies._common import tables_for
from pmkit.strategies.cbpside import (
    CbpSideState,
    cbpside_step,
    confidence_scale,
    contextual_width,
    predict_pi,
    pseudo_count,
    ridge_update,
)
from pmkit.structure import analyze

AT = apple_tasting()
AT_S = analyze(AT)
LAM = 0.05


def test_single_update_closed_form():
    s = CbpSideState.fresh(AT, 3, LAM)
    x = np.array([0.2, 0.5, 1.0])
    ridge_update(s, 1, x, encode_feedback(AT, 1, "⊙"))
    e = np.array([[0.0], [1.0]])
    expect = e @ x[None] @ np.linalg.inv(LAM * np.eye(3) + np.outer(x, x))
    np.testing.assert_allclose(s.theta_hat(1), expect, atol=1e-12)


def test_many_updates_match_dense_solve():
    rng = np.random.default_rng(0)
    d = 5
    s = CbpSideState.fresh(AT, d, LAM)
    X, Y = [], []
    for _ in range(50):
        x = rng.random(d)
        j = int(rng.integers(2))
        ridge_update(s, 1, x, observe(AT, 1, j))
        X.append(x)
        Y.append(np.eye(2)[j])
    X, Y = np.array(X).T, np.array(Y).T
    G = LAM * np.eye(d) + X @ X.T
    np.testing.assert_allclose(s.theta_hat(1), Y @ X.T @ np.linalg.inv(G), atol=1e-7)
    np.testing.assert_allclose(s.G_inv[1] @ G, np.eye(d), atol=1e-7)
    # action 0 untouched
    np.testing.assert_array_equal(s.G_inv[0], np.eye(d) / LAM)
    assert not s.block(0).any()


def test_prediction_basics():
    s = CbpSideState.fresh(AT, 4, LAM)
    np.testing.assert_array_equal(predict_pi(s, 1, np.ones(4)), [0.0, 0.0])


def test_one_hot_prediction_shrinks_frequencies():
    s = CbpSideState.fresh(AT, 2, LAM)
    e1, e2 = np.eye(2)
    for j in [0, 0, 0, 1]:
        ridge_update(s, 1, e1, observe(AT, 1, j))
    for j in [1, 1]:
        ridge_update(s, 1, e2, observe(AT, 1, j))
    np.testing.assert_allclose(predict_pi(s, 1, e1), np.array([3, 1]) / (LAM + 4))
    np.testing.assert_allclose(predict_pi(s, 1, e2), np.array([0, 2]) / (LAM + 2))


def test_prediction_not_clamped():
    s = CbpSideState.fresh(AT, 2, LAM)
    ridge_update(s, 1, np.array([1.0, 0.0]), observe(AT, 1, 0))
    assert predict_pi(s, 1, np.array([5.0, 0.0]))[0] > 1.0


def test_width_examples():
    s = CbpSideState.fresh(AT, 10, LAM)
    x = np.zeros(10)
    x[0] = 1.0
    assert contextual_width(s, 1, np.zeros(10), t=50) == 0.0
    assert contextual_width(s, 1, x, z=0.0) == pytest.approx(4 * math.sqrt(1 / LAM))
    expect = 2 * (math.sqrt(14 * math.log(100)) + 2) * math.sqrt(1 / LAM)
    assert contextual_width(s, 1, x, t=100) == pytest.approx(expect)
    assert confidence_scale(10, 1) == 0.0


def test_pseudo_counts():
    s = CbpSideState.fresh(AT, 3, LAM)
    e1 = np.eye(3)[0]
    assert pseudo_count(s, 1, e1) == pytest.approx(LAM)
    assert pseudo_count(s, 1, np.zeros(3)) == math.inf
    prev = pseudo_count(s, 1, e1)
    for k in range(7):
        ridge_update(s, 1, e1, observe(AT, 1, 0))
        now = pseudo_count(s, 1, e1)
        assert now >= prev
        prev = now
    assert pseudo_count(s, 1, e1) == pytest.approx(7.05)


def test_width_non_increasing_with_plays():
    rng = np.random.default_rng(0)
    s = CbpSideState.fresh(AT, 4, LAM)
    x = rng.random(4)
    prev = contextual_width(s, 1, x, z=1.0)
    for _ in range(30):
        ridge_update(s, 1, x if rng.random() < 0.5 else rng.random(4), observe(AT, 1, 1))
        now = contextual_width(s, 1, x, z=1.0)
        assert now <= prev + 1e-12
        prev = now


def test_delta_reconstruction_with_true_theta():
    # linear model p*(x) = theta x on contexts with a bias coordinate
    theta_A = np.array([0.1, 0.3, -0.05])
    theta = np.vstack([theta_A, np.array([1.0, 0, 0]) - theta_A])
    tab = tables_for(AT_S)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = np.array([1.0, rng.random(), rng.random()])
        p = theta @ x
        pi = np.concatenate([AT.signal_matrices[a] @ theta @ x for a in range(2)])
        assert tab.obs_mat[0] @ pi == pytest.approx((AT.loss[0] - AT.loss[1]) @ p, abs=1e-12)


def test_init_rounds_and_context_shape():
    LE = label_efficient()
    s = CbpSideState.fresh(LE, 2)
    st_le = analyze(LE)
    for t in range(3):
        a = cbpside_step(LE, st_le, s, np.array([0.5, 0.5]))
        assert a == t
        ridge_update(s, a, np.array([0.5, 0.5]), observe(LE, a, 1))
    with pytest.raises(ValueError):
        cbpside_step(LE, st_le, s, np.ones(3))


def test_single_bin_reproduces_cbpside():
    th = np.full((1, 10), 0.1)
    envs = [LinearPmEnv(AT, th, "uniform_bias", rng=np.random.default_rng(3)) for _ in range(2)]
    a_pol = CBPside(AT, 10, AT_S)
    b_pol = CBPside(AT, 10, AT_S, randomization=RandomizationConfig(k_bins=1), rng=np.random.default_rng(1))
    for _ in range(1500):
        xa, xb = envs[0].context(), envs[1].context()
        a, b = a_pol.select(xa), b_pol.select(xb)
        assert a == b
        a_pol.update(a, envs[0].play(a)[0], xa)
        b_pol.update(b, envs[1].play(b)[0], xb)


def test_one_hot_contexts_converge():
    theta = np.array([[0.9, 0.1], [0.1, 0.9]])
    env = LinearPmEnv(AT, theta, "onehot", "sum", rng=np.random.default_rng(0))
    pol = CBPside(AT, 2, AT_S, randomization=RandomizationConfig(), rng=np.random.default_rng(1))
    regret = []
    for _ in range(6000):
        x = env.context()
        a = pol.select(x)
        _, r = env.play(a)
        pol.update(a, env.game.symbol_table[a, env.last_outcome], x)
        regret.append(r)
    regret = np.cumsum(regret)
    assert regret[-1] - regret[2999] < 0.25 * regret[2999] + 5

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmkit.core import WEDGE, apple_tasting, label_efficient
from pmkit.environments import (
    BernoulliPmEnv,
    ClassifierStream,
    LinearPmEnv,
    env_step,
    generate_classifier,
    make_env,
    make_linear_env,
    sample_instance,
    stream_step,
)

AT = apple_tasting()
LE = label_efficient()


def test_outcome_frequencies_within_four_sigma():
    p = np.array([0.3, 0.7])
    env = BernoulliPmEnv(LE, p, np.random.default_rng(0))
    n = 10 ** 6
    out = np.array([env._outcome() for _ in range(n)])
    freq = np.bincount(out, minlength=2) / n
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / n))


def test_apple_tasting_known_instance():
    env = BernoulliPmEnv(AT, [1.0, 0.0], np.random.default_rng(0))
    assert env.best() == 1
    for _ in range(100):
        obs, diag = env_step(env, 1)
        assert AT.symbols[1][obs.symbol_index] == WEDGE
        assert diag.outcome == 0 and diag.regret == 0.0
    assert env_step(env, 0)[1].regret == 1.0


def test_invalid_distribution_and_action():
    with pytest.raises(ValueError):
        BernoulliPmEnv(AT, [0.6, 0.6])
    with pytest.raises(ValueError):
        BernoulliPmEnv(AT, [1.2, -0.2])
    with pytest.raises(IndexError):
        env_step(BernoulliPmEnv(AT, [0.5, 0.5]), 2)


@given(st.floats(0, 1), st.integers(0, 2), st.integers(1, 300))
@settings(max_examples=40, deadline=None)
def test_fixed_action_regret_is_t_delta(p, k, T):
    env = BernoulliPmEnv(LE, [p, 1 - p], np.random.default_rng(1))
    ell = LE.loss @ env.p_star
    total = sum(env.play(k)[1] for _ in range(T))
    assert total == pytest.approx(T * (ell[k] - ell.min()), abs=1e-9)


def test_optimal_action_has_zero_regret():
    env = BernoulliPmEnv(LE, [0.45, 0.55], np.random.default_rng(2))
    assert sum(env.play(env.best())[1] for _ in range(500)) == 0.0


def test_instance_sampler_ranges():
    rng = np.random.default_rng(0)
    imb = np.array([sample_instance("imbalanced", rng)[0] for _ in range(20000)])
    assert np.all((imb <= 0.2) | (imb >= 0.8))
    assert abs((imb <= 0.2).mean() - 0.5) < 0.02
    bal = np.array([sample_instance("balanced", rng)[0] for _ in range(2000)])
    assert np.all((bal >= 0.4) & (bal <= 0.6))
    with pytest.raises(ValueError):
        sample_instance("weird", rng)


def test_linear_env_emits_distributions():
    env = make_env({"env": "linear", "d": 10, "theta": "const:0.1"}, np.random.default_rng(0))
    ps = []
    for _ in range(10 ** 5):
        env.context()
        ps.append(env.p)
    ps = np.array(ps)
    assert np.all(ps >= 0)
    np.testing.assert_allclose(ps.sum(axis=1), 1.0, atol=1e-12)
    assert ps[:, 0].std() > 0.05  # outcome probabilities depend on the context


def test_sum_normalisation_const_theta_is_balanced():
    env = make_linear_env(AT, np.full((2, 10), 0.1), "uniform", normalization="sum", rng=np.random.default_rng(0))
    for _ in range(100):
        env.context()
        np.testing.assert_allclose(env.p, [0.5, 0.5], atol=1e-15)


def test_onehot_contexts_pick_coordinate_pair():
    theta = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.1]])
    env = LinearPmEnv(AT, theta, "onehot", "sum", rng=np.random.default_rng(0))
    np.testing.assert_allclose(env.p_of([1, 0, 0]), [1, 0])
    np.testing.assert_allclose(env.p_of([0, 0, 1]), [0.75, 0.25])


def test_degenerate_contexts_are_redrawn():
    theta = np.array([[1.0, 0.0], [0.0, 0.0]])
    env = LinearPmEnv(AT, theta, "onehot", "sum", rng=np.random.default_rng(0))
    assert env.p_of([0.0, 1.0]) is None
    for _ in range(50):
        np.testing.assert_array_equal(env.context(), [1.0, 0.0])
    dead = LinearPmEnv(AT, np.zeros((2, 2)), "uniform", "sum", rng=np.random.default_rng(0), max_redraws=5)
    with pytest.raises(RuntimeError):
        dead.context()


def test_linear_regret_uses_context_distribution():
    env = make_env({"env": "linear", "d": 3, "theta": [[0.2, 0.5, 0.1]]}, np.random.default_rng(0))
    x = env.context()
    p = env.p
    ell = AT.loss @ p
    assert env.play(0)[1] == pytest.approx(ell[0] - ell.min())
    assert env.best() == int(np.argmin(ell))
    np.testing.assert_allclose(p[0], 0.2 * x[0] + 0.5 * x[1] + 0.1 * x[2])


def test_identity_classifier_has_no_errors():
    C = 4
    s = ClassifierStream(C, np.full(C, 0.25), np.eye(C))
    assert s.global_error == 0.0
    np.testing.assert_array_equal(s.error_rates, 0.0)
    rng = np.random.default_rng(0)
    assert not any(stream_step(s, rng)[1] for _ in range(2000))


def test_uniform_error_global_rate():
    C = 5
    conf = np.full((C, C), 0.05 / (C - 1))
    np.fill_diagonal(conf, 0.95)
    s = ClassifierStream(C, np.full(C, 1 / C), conf)
    assert s.global_error == pytest.approx(0.05)
    np.testing.assert_allclose(s.error_rates, 0.05)


def test_weighted_error_contribution():
    dist = np.array([0.05, 0.95])
    conf = np.array([[0.7, 0.3], [0.0, 1.0]])
    s = ClassifierStream(2, dist, conf, error_model="diagonal")
    assert s.global_error == pytest.approx(0.015)
    np.testing.assert_allclose(s.error_rates, [0.3, 0.0])
    # Bayes view: predicted class 1 absorbs the 0.015 mistakes
    b = ClassifierStream(2, dist, conf)
    np.testing.assert_allclose(b.predicted_dist, [0.035, 0.965])
    np.testing.assert_allclose(b.error_rates, [0.0, 0.015 / 0.965])


def test_always_wrong_class():
    conf = np.array([[0.0, 1.0], [0.0, 1.0]])
    s = ClassifierStream(2, np.array([0.5, 0.5]), conf, error_model="diagonal")
    rng = np.random.default_rng(0)
    for _ in range(500):
        c, err = stream_step(s, rng)
        if c == 0:
            assert err


def test_stream_error_frequency_binomial():
    rng = np.random.default_rng(3)
    s = generate_classifier(3, "balanced", "nonuniform", rng)
    n = 10 ** 5
    hits = np.zeros(3)
    errs = np.zeros(3)
    for _ in range(n):
        c, e = stream_step(s, rng)
        hits[c] += 1
        errs[c] += e
    p = s.error_rates
    for c in range(3):
        sd = np.sqrt(p[c] * (1 - p[c]) / hits[c])
        assert abs(errs[c] / hits[c] - p[c]) <= 3 * sd + 1e-12
    np.testing.assert_allclose(hits / n, s.predicted_dist, atol=0.01)


@pytest.mark.parametrize("balance", ["balanced", "imbalanced"])
@pytest.mark.parametrize("errors", ["uniform", "nonuniform"])
def test_generated_classifiers_respect_cap(balance, errors):
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = generate_classifier(10, balance, errors, rng)
        assert s.global_error < 0.1
        np.testing.assert_allclose(s.confusion.sum(axis=1), 1.0)
        assert np.all(s.confusion >= 0)
        if balance == "balanced":
            np.testing.assert_allclose(s.class_dist, 0.1)
        if errors == "uniform":
            d = 1 - np.diag(s.confusion)
            np.testing.assert_allclose(d, d[0])


def test_make_env_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_env({"env": "adversarial"})

import numpy as np
import pytest

from pmkit.core import apple_tasting, build_game, label_efficient, tau_detection
from pmkit.numerics import lp_extremize
from pmkit.strategies._common import PairTables
from pmkit.structure import Observability, ObservabilityError, analyze, cell_of, classify_actions, nplus


def _check_identities(s, rng, n_p=100):
    g = s.game
    for (i, j), V in s.observer_sets.items():
        recon = sum(g.signal_matrices[a].T @ s.observer_vector(i, j, a) for a in V)
        assert np.max(np.abs(recon - (g.loss[i] - g.loss[j]))) <= 1e-9
        for p in rng.dirichlet(np.ones(g.n_outcomes), size=n_p):
            est = sum(s.observer_vector(i, j, a) @ (g.signal_matrices[a] @ p) for a in V)
            assert abs(est - (g.loss[i] - g.loss[j]) @ p) <= 1e-9


def test_apple_tasting_structure():
    s = analyze(apple_tasting())
    assert s.observability is Observability.LOCAL
    assert s.pareto == {0, 1} and not s.dominated and not s.degenerate
    assert s.neighbor_pairs == ((0, 1),)
    assert s.nplus[(0, 1)] == {0, 1}
    np.testing.assert_array_equal(s.observer_vector(0, 1, 1), [1, -1])
    np.testing.assert_array_equal(s.observer_vector(0, 1, 0), [0])
    np.testing.assert_array_equal(s.weights, [0, 1])


def test_label_efficient_structure():
    s = analyze(label_efficient())
    assert s.observability is Observability.GLOBAL_ONLY
    assert s.observability.difficulty == "hard"
    assert s.dominated == {0} and s.pareto == {1, 2}
    assert s.neighbor_pairs == ((1, 2),)
    assert s.nplus[(1, 2)] == {1, 2}
    assert s.observer_sets[(1, 2)] == (0, 1, 2)
    np.testing.assert_array_equal(s.observer_vector(1, 2, 0), [-1, 1])
    np.testing.assert_array_equal(s.observer_vector(1, 2, 1), [0])
    np.testing.assert_array_equal(s.observer_vector(1, 2, 2), [0])
    assert s.weights[0] == 1


@pytest.mark.parametrize("tau", [0.1, 0.2, 0.5, 0.9])
def test_tau_detection_structure(tau):
    s = analyze(tau_detection(tau))
    assert s.observability is Observability.LOCAL
    assert s.neighbor_pairs == ((0, 1),)
    # v for the verify action, zero for pass
    np.testing.assert_allclose(s.observer_vector(0, 1, 0), [1 - 1 / tau, 1], atol=1e-12)
    np.testing.assert_array_equal(s.observer_vector(0, 1, 1), [0])
    assert s.weights[1] == 0
    # cell boundary at p_A = tau
    g = s.game
    hi, _ = lp_extremize([1, 0], cell_of(g, 1), "max")
    lo, _ = lp_extremize([1, 0], cell_of(g, 0), "min")
    assert hi == pytest.approx(tau) and lo == pytest.approx(tau)


def test_tau_half_min_norm_oracle():
    # stacked system [[1, 0, 1], [0, 1, 1]] x = [-1, 1] with the single-symbol block dropped
    s = analyze(tau_detection(0.5))
    np.testing.assert_allclose(s.observer_vector(0, 1, 0), [-1, 1])


def test_cell_of_apple_tasting_is_halfspace():
    cs = cell_of(apple_tasting(), 0)
    assert cs.contains([0.3, 0.7]) and not cs.contains([0.7, 0.3])


def test_cells_cover_the_simplex():
    rng = np.random.default_rng(0)
    for g in (apple_tasting(), label_efficient(), tau_detection(0.3)):
        cells = [cell_of(g, i) for i in range(g.n_actions)]
        for p in rng.dirichlet(np.ones(g.n_outcomes), size=10_000 // 3):
            best = int(np.argmin(g.loss @ p))
            assert cells[best].contains(p, tol=1e-9)


def test_identities_on_bundled_games():
    rng = np.random.default_rng(1)
    for g in (apple_tasting(), label_efficient(), tau_detection(0.1), tau_detection(0.5)):
        _check_identities(analyze(g), rng)


def test_identities_on_random_games(random_games):
    rng = np.random.default_rng(2)
    for _, s in random_games[:10]:
        _check_identities(s, rng, n_p=20)


def test_mirrored_observer_vectors(random_games):
    for _, s in random_games:
        for (i, j) in s.neighbor_pairs:
            for a in s.observer_sets[(i, j)]:
                np.testing.assert_allclose(s.observer_vector(j, i, a), -s.observer_vector(i, j, a), atol=1e-12)


def test_weights_are_max_inf_norms(random_games):
    for g, s in random_games:
        expect = np.zeros(g.n_actions)
        for (i, j, a), v in s.observer_vectors.items():
            if v.size:
                expect[a] = max(expect[a], np.abs(v).max())
        np.testing.assert_allclose(s.weights, expect)


def test_nplus_contains_its_pair(random_games):
    for _, s in random_games:
        for (i, j) in s.neighbor_pairs:
            assert {i, j} <= s.nplus[(i, j)]
            if s.observability is Observability.LOCAL:
                assert set(s.observer_sets[(i, j)]) == s.nplus[(i, j)]


def test_duplicate_and_dominated_rows():
    g = build_game([[1, 0], [1, 0], [0, 1], [2, 2]], [["a", "b"], ["a", "b"], ["a", "b"], ["a", "b"]])
    pareto, dominated, degenerate = classify_actions(g)
    assert pareto == {0, 1, 2} and dominated == {3} and not degenerate
    assert 1 in nplus(g, 0, 2)


def test_degenerate_action():
    g = build_game([[1, 0], [0, 1], [0.5, 0.5]], [["a", "b"]] * 3)
    s = analyze(g)
    assert s.degenerate == {2}
    assert s.pareto == {0, 1}
    assert s.nplus[(0, 1)] == {0, 1, 2}


def test_trivial_game():
    g = build_game([[0, 0], [1, 1]], [["a", "a"], ["a", "a"]])
    assert analyze(g).observability is Observability.TRIVIAL


def test_not_globally_observable():
    g = build_game([[1, 0], [0, 1]], [["a", "a"], ["a", "a"]])
    s = analyze(g)
    assert s.observability is Observability.NONE
    assert s.to_dict()["difficulty"] == "hopeless"
    with pytest.raises(ObservabilityError):
        PairTables(s)


def test_report_is_json_ready():
    import json
    d = analyze(label_efficient()).to_dict()
    json.dumps(d)
    assert d["observability"] == "globally_observable_only"
    assert d["observer_vectors"]["1,2,0"] == [-1.0, 1.0]

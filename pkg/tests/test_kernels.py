import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmkit import _kernels
from pmkit._accel import HAVE_NUMBA

nb = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable")
NP, NB = _kernels.numpy_impl, _kernels.numba_impl


def _closed_form(a, b, k, eps, sigma, residual):
    rho = [a + i * (b - a) / (k - 1) for i in range(k)]
    pbar = [np.exp(-r * r / (2 * sigma * sigma)) for r in rho]
    norm = sum(pbar) if residual else sum(pbar[:-1])
    p = [(1 - eps) * w / norm for w in pbar[:-1]]
    p.append(1 - sum(p) if residual else eps)
    return np.array(rho), np.array(p)


@pytest.mark.parametrize("residual", [False, True])
@pytest.mark.parametrize("impl", [NP, pytest.param(NB, marks=nb)])
def test_bin_probabilities_closed_form(impl, residual):
    rho, p = impl.bin_probabilities(0.0, 2.0, 5, 1e-7, 1.0, residual)
    r0, p0 = _closed_form(0.0, 2.0, 5, 1e-7, 1.0, residual)
    np.testing.assert_allclose(rho, r0, atol=1e-15)
    np.testing.assert_allclose(p, p0, atol=1e-15)
    assert p.sum() == pytest.approx(1.0)
    if residual:
        assert p[-1] >= 1e-7
    else:
        assert p[-1] == 1e-7


@pytest.mark.parametrize("impl", [NP, pytest.param(NB, marks=nb)])
def test_single_bin_and_degenerate_interval(impl):
    assert impl.bin_probabilities(0.0, 3.0, 1, 1e-7, 1.0)[0].tolist() == [3.0]
    assert impl.bin_probabilities(0.0, -1.0, 5, 1e-7, 1.0)[0].tolist() == [-1.0]
    z = impl.sample_z(0.0, 3.0, 1, 1e-7, 1.0, np.random.default_rng(0).random(50))
    assert np.all(z == 3.0)


@nb
@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.floats(0.0, 5.0), st.floats(1e-6, 0.9), st.floats(0.2, 3.0), st.integers(0, 999),
       st.booleans())
def test_sample_z_backends_agree(k, b, eps, sigma, seed, residual):
    u = np.random.default_rng(seed).random(200)
    np.testing.assert_array_equal(NP.sample_z(0.0, b, k, eps, sigma, u, residual),
                                  NB.sample_z(0.0, b, k, eps, sigma, u, residual))


@nb
@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 999))
def test_sherman_morrison_backends_agree(d, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d))
    G_inv = np.linalg.inv(M @ M.T + np.eye(d))
    x = rng.normal(size=d)
    a, da = NP.sherman_morrison(G_inv, x)
    b, db = NB.sherman_morrison(G_inv, x)
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert da == pytest.approx(db)


@nb
@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(1, 6), st.integers(0, 999))
def test_pair_and_context_stats_agree(n_act, n_pairs, seed):
    rng = np.random.default_rng(seed)
    sig = rng.integers(1, 4, size=n_act)
    row_action = np.repeat(np.arange(n_act), sig).astype(np.int64)
    R = row_action.size
    obs = rng.normal(size=(n_pairs, R))
    winf = np.abs(rng.normal(size=(n_pairs, n_act))) * (rng.random((n_pairs, n_act)) < 0.7)
    counts = rng.integers(1, 50, size=n_act).astype(float)
    nu = rng.random(R) * 10
    for x, y in zip(NP.cbp_pair_stats(obs, winf, nu, row_action, counts),
                    NB.cbp_pair_stats(obs, winf, nu, row_action, counts)):
        np.testing.assert_allclose(x, y, atol=1e-12)
    d = 4
    A = rng.normal(size=(n_act, d, d))
    G = np.einsum("aij,akj->aik", A, A) + np.eye(d)
    B = rng.normal(size=(R, d))
    xv = rng.random(d)
    for x, y in zip(NP.contextual_stats(G, B, row_action, xv), NB.contextual_stats(G, B, row_action, xv)):
        np.testing.assert_allclose(x, y, atol=1e-10)


@nb
def test_simplex_backends_agree():
    rng = np.random.default_rng(3)
    m, n = 6, 9
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = rng.random((m, n))
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = rng.random(m) + 0.1
    T[m, :n] = -rng.random(n)
    basis = np.arange(n, n + m)
    T1, T2, b1, b2 = T.copy(), T.copy(), basis.copy(), basis.copy()
    assert NP.simplex(T1, b1, n + m, 1e-11, 500) == NB.simplex(T2, b2, n + m, 1e-11, 500) == _kernels.OPTIMAL
    np.testing.assert_allclose(T1, T2, atol=1e-10)
    np.testing.assert_array_equal(b1, b2)


def test_env_flag_selects_numpy(tmp_path):
    import subprocess
    import sys
    code = "from pmkit import _kernels as k; print(k._active is k.numpy_impl)"
    out = subprocess.run([sys.executable, "-c", code], env={"PMKIT_DISABLE_NUMBA": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "True"

"""Hot numeric kernels.

Every kernel exists twice: a loop-style version compiled with numba and a
vectorised numpy version.  The public names at the bottom of the module point
at one or the other depending on :data:`pmkit._accel.USE_NUMBA`.  Both
versions are importable for benchmarking through :data:`numba_impl` and
:data:`numpy_impl`.
"""
from types import SimpleNamespace

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

# simplex status codes
OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


# --------------------------------------------------------------------------
# tableau simplex (Bland's rule)
# --------------------------------------------------------------------------

def _np_simplex(T, basis, n_enter, tol, max_iter):
    m = T.shape[0] - 1
    for _ in range(max_iter):
        neg = np.flatnonzero(T[m, :n_enter] < -tol)
        if neg.size == 0:
            return OPTIMAL
        col = neg[0]
        column = T[:m, col]
        pos = np.flatnonzero(column > tol)
        if pos.size == 0:
            return UNBOUNDED
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol]
        row = ties[np.argmin(basis[ties])]
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        basis[row] = col
    return ITERATION_LIMIT


def _nb_simplex_impl(T, basis, n_enter, tol, max_iter):
    m = T.shape[0] - 1
    ncol = T.shape[1]
    for _ in range(max_iter):
        col = -1
        for j in range(n_enter):
            if T[m, j] < -tol:
                col = j
                break
        if col == -1:
            return OPTIMAL
        row = -1
        best = np.inf
        for i in range(m):
            if T[i, col] > tol:
                r = T[i, ncol - 1] / T[i, col]
                if row == -1 or r < best - tol:
                    row = i
                    best = r
                elif r <= best + tol and basis[i] < basis[row]:
                    row = i
                    best = min(best, r)
        if row == -1:
            return UNBOUNDED
        piv = T[row, col]
        for j in range(ncol):
            T[row, j] /= piv
        for i in range(m + 1):
            if i != row:
                f = T[i, col]
                if f != 0.0:
                    for j in range(ncol):
                        T[i, j] -= f * T[row, j]
        basis[row] = col
    return ITERATION_LIMIT


# --------------------------------------------------------------------------
# Sherman-Morrison
# --------------------------------------------------------------------------

def _np_sherman_morrison(G_inv, x):
    gx = G_inv @ x
    denom = 1.0 + x @ gx
    return G_inv - np.outer(gx, gx) / denom, denom


def _nb_sherman_morrison_impl(G_inv, x):
    d = x.shape[0]
    gx = np.zeros(d)
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += G_inv[i, j] * x[j]
        gx[i] = s
    denom = 1.0
    for i in range(d):
        denom += x[i] * gx[i]
    out = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            out[i, j] = G_inv[i, j] - gx[i] * gx[j] / denom
    return out, denom


# --------------------------------------------------------------------------
# per-round statistics
# --------------------------------------------------------------------------

def _np_cbp_pair_stats(obs_mat, winf_mat, nu_flat, row_action, counts):
    freq = nu_flat / counts[row_action]
    delta = obs_mat @ freq
    base = winf_mat @ (1.0 / np.sqrt(counts))
    return delta, base


def _nb_cbp_pair_stats_impl(obs_mat, winf_mat, nu_flat, row_action, counts):
    n_pairs, n_rows = obs_mat.shape
    n_act = counts.shape[0]
    delta = np.zeros(n_pairs)
    base = np.zeros(n_pairs)
    for p in range(n_pairs):
        s = 0.0
        for r in range(n_rows):
            c = obs_mat[p, r]
            if c != 0.0:
                s += c * nu_flat[r] / counts[row_action[r]]
        delta[p] = s
        w = 0.0
        for a in range(n_act):
            c = winf_mat[p, a]
            if c != 0.0:
                w += c / np.sqrt(counts[a])
        base[p] = w
    return delta, base


def _np_contextual_stats(G_inv, B_flat, row_action, x):
    gx = G_inv @ x  # (N, d)
    quad = gx @ x
    pi_flat = np.einsum("rd,rd->r", B_flat, gx[row_action])
    return pi_flat, quad


def _nb_contextual_stats_impl(G_inv, B_flat, row_action, x):
    n_act, d, _ = G_inv.shape
    gx = np.zeros((n_act, d))
    quad = np.zeros(n_act)
    for a in range(n_act):
        q = 0.0
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += G_inv[a, i, j] * x[j]
            gx[a, i] = s
            q += s * x[i]
        quad[a] = q
    n_rows = B_flat.shape[0]
    pi_flat = np.zeros(n_rows)
    for r in range(n_rows):
        a = row_action[r]
        s = 0.0
        for j in range(d):
            s += B_flat[r, j] * gx[a, j]
        pi_flat[r] = s
    return pi_flat, quad


# --------------------------------------------------------------------------
# discretised truncated Gaussian
# --------------------------------------------------------------------------

def _np_bin_probabilities(a, b, k, eps, sigma, residual=False):
    """Support and weights of the discretised truncated Gaussian.

    The top bin ``b`` gets probability ``eps`` and the others share
    ``1 - eps`` in proportion to the Gaussian density.  With ``residual`` the
    density is normalised over all ``k`` bins and ``b`` takes the leftover.
    """
    if k == 1 or b <= a:
        return np.array([b]), np.array([1.0])
    rho = np.linspace(a, b, k)
    pbar = np.exp(-rho * rho / (2.0 * sigma * sigma))
    norm = pbar.sum() if residual else pbar[:-1].sum()
    p = (1.0 - eps) * pbar / norm
    p[-1] = 1.0 - p[:-1].sum() if residual else eps
    return rho, p


def _np_sample_z(a, b, k, eps, sigma, u, residual=False):
    rho, p = _np_bin_probabilities(a, b, k, eps, sigma, residual)
    idx = np.searchsorted(np.cumsum(p), u, side="right")
    return rho[np.minimum(idx, rho.size - 1)]


def _nb_bin_probabilities_impl(a, b, k, eps, sigma, residual=False):
    if k == 1 or b <= a:
        return np.array([b]), np.array([1.0])
    rho = np.empty(k)
    pbar = np.empty(k)
    step = (b - a) / (k - 1)
    total = 0.0
    for i in range(k):
        rho[i] = a + i * step
        pbar[i] = np.exp(-rho[i] * rho[i] / (2.0 * sigma * sigma))
        if residual or i < k - 1:
            total += pbar[i]
    rho[k - 1] = b
    p = np.empty(k)
    head = 0.0
    for i in range(k - 1):
        p[i] = (1.0 - eps) * pbar[i] / total
        head += p[i]
    p[k - 1] = 1.0 - head if residual else eps
    return rho, p


def _nb_sample_z_impl(a, b, k, eps, sigma, u, residual=False):
    rho, p = _nb_bin_probabilities(a, b, k, eps, sigma, residual)
    out = np.empty(u.shape[0])
    for n in range(u.shape[0]):
        acc = 0.0
        idx = rho.shape[0] - 1
        for i in range(rho.shape[0]):
            acc += p[i]
            if u[n] < acc:
                idx = i
                break
        out[n] = rho[idx]
    return out


if HAVE_NUMBA:
    _nb_simplex = njit(_nb_simplex_impl)
    _nb_sherman_morrison = njit(_nb_sherman_morrison_impl)
    _nb_cbp_pair_stats = njit(_nb_cbp_pair_stats_impl)
    _nb_contextual_stats = njit(_nb_contextual_stats_impl)
    _nb_bin_probabilities = njit(_nb_bin_probabilities_impl)
    _nb_sample_z = njit(_nb_sample_z_impl)
else:  # pragma: no cover
    _nb_simplex = _nb_simplex_impl
    _nb_sherman_morrison = _nb_sherman_morrison_impl
    _nb_cbp_pair_stats = _nb_cbp_pair_stats_impl
    _nb_contextual_stats = _nb_contextual_stats_impl
    _nb_bin_probabilities = _nb_bin_probabilities_impl
    _nb_sample_z = _nb_sample_z_impl


numpy_impl = SimpleNamespace(
    simplex=_np_simplex,
    sherman_morrison=_np_sherman_morrison,
    cbp_pair_stats=_np_cbp_pair_stats,
    contextual_stats=_np_contextual_stats,
    bin_probabilities=_np_bin_probabilities,
    sample_z=_np_sample_z,
)

numba_impl = SimpleNamespace(
    simplex=_nb_simplex,
    sherman_morrison=_nb_sherman_morrison,
    cbp_pair_stats=_nb_cbp_pair_stats,
    contextual_stats=_nb_contextual_stats,
    bin_probabilities=_nb_bin_probabilities,
    sample_z=_nb_sample_z,
)

_active = numba_impl if USE_NUMBA else numpy_impl

simplex = _active.simplex
sherman_morrison = _active.sherman_morrison
cbp_pair_stats = _active.cbp_pair_stats
contextual_stats = _active.contextual_stats
bin_probabilities = _active.bin_probabilities
sample_z = _active.sample_z

"""Small dense kernels: LP over polytopes, minimum-norm solves, rank tests,
rank-one inverse updates.

Problem sizes are tiny (a handful of outcomes, at most ``N**2`` rows) so the
LP solver is a plain two-phase tableau simplex with Bland's rule.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "ConstraintSet",
    "Feasibility",
    "InfeasibleError",
    "NoSolution",
    "STRICT_SLACK",
    "affine_dimension",
    "in_direct_sum",
    "least_norm_solve",
    "lp_extremize",
    "lp_feasible",
    "rank1_inverse_update",
]

STRICT_SLACK = 1e-7
FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11


class InfeasibleError(ValueError):
    pass


class NoSolution(ValueError):
    """The linear system has no exact solution."""


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """``{p : A_le p <= b_le (strict rows tightened by slack), A_eq p = b_eq}``.

    Rows flagged in ``strict`` stand for ``a.p < b`` and are enforced as
    ``a.p <= b - strict_slack``.
    """

    dim: int
    A_le: np.ndarray
    b_le: np.ndarray
    strict: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    strict_slack: float = STRICT_SLACK

    def __post_init__(self):
        if self.strict_slack <= 0:
            raise ValueError("strict_slack must be positive")
        if self.A_le.shape != (len(self.b_le), self.dim) or self.A_eq.shape != (len(self.b_eq), self.dim):
            raise ValueError("constraint rows do not match dim")
        if self.strict.shape != self.b_le.shape:
            raise ValueError("strict mask must have one entry per <= row")

    @classmethod
    def build(cls, dim, le=(), eq=(), strict=None, strict_slack=STRICT_SLACK):
        """Build from iterables of ``(a, b)`` pairs."""
        le = list(le)
        eq = list(eq)
        A_le = np.array([np.asarray(a, float) for a, _ in le]).reshape(len(le), dim)
        b_le = np.array([float(b) for _, b in le])
        A_eq = np.array([np.asarray(a, float) for a, _ in eq]).reshape(len(eq), dim)
        b_eq = np.array([float(b) for _, b in eq])
        mask = np.zeros(len(le), bool) if strict is None else np.asarray(strict, bool)
        return cls(dim, A_le, b_le, mask, A_eq, b_eq, strict_slack)

    @classmethod
    def simplex(cls, dim):
        """The probability simplex: ``sum(p) = 1`` and ``-p_k <= 0``."""
        return cls(
            dim,
            -np.eye(dim),
            np.zeros(dim),
            np.zeros(dim, bool),
            np.ones((1, dim)),
            np.ones(1),
        )

    @classmethod
    def empty(cls, dim):
        z = np.zeros((0, dim))
        return cls(dim, z, np.zeros(0), np.zeros(0, bool), z.copy(), np.zeros(0))

    def with_le(self, A, b, strict=False) -> "ConstraintSet":
        A = np.atleast_2d(np.asarray(A, float))
        b = np.atleast_1d(np.asarray(b, float))
        mask = np.broadcast_to(np.asarray(strict, bool), b.shape)
        return ConstraintSet(
            self.dim,
            np.vstack([self.A_le, A]),
            np.concatenate([self.b_le, b]),
            np.concatenate([self.strict, mask]),
            self.A_eq,
            self.b_eq,
            self.strict_slack,
        )

    def with_eq(self, A, b) -> "ConstraintSet":
        A = np.atleast_2d(np.asarray(A, float))
        b = np.atleast_1d(np.asarray(b, float))
        return ConstraintSet(
            self.dim, self.A_le, self.b_le, self.strict,
            np.vstack([self.A_eq, A]), np.concatenate([self.b_eq, b]), self.strict_slack,
        )

    def intersect(self, other: "ConstraintSet") -> "ConstraintSet":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return ConstraintSet(
            self.dim,
            np.vstack([self.A_le, other.A_le]),
            np.concatenate([self.b_le, other.b_le]),
            np.concatenate([self.strict, other.strict]),
            np.vstack([self.A_eq, other.A_eq]),
            np.concatenate([self.b_eq, other.b_eq]),
            min(self.strict_slack, other.strict_slack),
        )

    def effective_b_le(self) -> np.ndarray:
        return self.b_le - np.where(self.strict, self.strict_slack, 0.0)

    def violation(self, p) -> float:
        """Largest constraint violation at ``p`` (0 when satisfied)."""
        p = np.asarray(p, float)
        v = 0.0
        if len(self.b_le):
            v = max(v, float(np.max(self.A_le @ p - self.effective_b_le())))
        if len(self.b_eq):
            v = max(v, float(np.max(np.abs(self.A_eq @ p - self.b_eq))))
        return max(v, 0.0)

    def contains(self, p, tol=FEAS_TOL) -> bool:
        return self.violation(p) <= tol

    def signature(self) -> bytes:
        """Exact byte key of the constraint rows, usable for memoisation."""
        parts = [
            np.int64(self.dim).tobytes(),
            self.A_le.tobytes(), self.effective_b_le().tobytes(),
            b"|", self.A_eq.tobytes(), self.b_eq.tobytes(),
        ]
        return b"".join(parts)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: np.ndarray | None = None

    def __bool__(self):
        return self.feasible


# --------------------------------------------------------------------------
# two-phase simplex
# --------------------------------------------------------------------------

def _standard_form(cs: ConstraintSet):
    """Rewrite ``cs`` over free ``p`` as ``A x = b, x >= 0`` with ``b >= 0``.

    Columns are ``[u (dim), w (dim), slack (n_le)]`` with ``p = u - w``.
    """
    n = cs.dim
    r1, r2 = len(cs.b_le), len(cs.b_eq)
    A = np.zeros((r1 + r2, 2 * n + r1))
    A[:r1, :n] = cs.A_le
    A[:r1, n:2 * n] = -cs.A_le
    A[:r1, 2 * n:] = np.eye(r1)
    A[r1:, :n] = cs.A_eq
    A[r1:, n:2 * n] = -cs.A_eq
    b = np.concatenate([cs.effective_b_le(), cs.b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)
    return A, b


def _solve(cs: ConstraintSet, objective=None):
    """Return ``(status, p)``; status in {"infeasible", "optimal", "unbounded", "failed"}.

    ``objective`` is minimised when given.
    """
    n = cs.dim
    A, b = _standard_form(cs)
    m, ncol = A.shape
    if m == 0:
        p = np.zeros(n)
        if objective is not None and np.any(np.asarray(objective) != 0):
            return "unbounded", None
        return "optimal", p
    max_iter = 50 * (m + ncol) + 100

    # phase 1: artificial basis
    T = np.zeros((m + 1, ncol + m + 1))
    T[:m, :ncol] = A
    T[:m, ncol:ncol + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :ncol] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(ncol, ncol + m, dtype=np.int64)
    status = _kernels.simplex(T, basis, ncol, _PIVOT_TOL, max_iter)
    if status != _kernels.OPTIMAL:
        return "failed", None
    scale = max(1.0, float(np.abs(b).max()))
    if -T[m, -1] > FEAS_TOL * scale:
        return "infeasible", None

    # drive artificials out of the basis; drop redundant rows
    keep = np.ones(m, bool)
    for i in range(m):
        if basis[i] >= ncol:
            cand = np.flatnonzero(np.abs(T[i, :ncol]) > 1e-9)
            if cand.size == 0:
                keep[i] = False
                continue
            j = cand[0]
            T[i] /= T[i, j]
            f = T[:, j].copy()
            f[i] = 0.0
            T -= np.outer(f, T[i])
            basis[i] = j
    rows = np.flatnonzero(keep)
    T2 = np.zeros((rows.size + 1, ncol + 1))
    T2[:-1, :ncol] = T[rows, :ncol]
    T2[:-1, -1] = T[rows, -1]
    basis = basis[rows].copy()

    if objective is not None:
        c = np.zeros(ncol)
        obj = np.asarray(objective, float)
        c[:n] = obj
        c[n:2 * n] = -obj
        cb = c[basis]
        T2[-1, :ncol] = c - cb @ T2[:-1, :ncol]
        T2[-1, -1] = -cb @ T2[:-1, -1]
        status = _kernels.simplex(T2, basis, ncol, _PIVOT_TOL, max_iter)
        if status == _kernels.UNBOUNDED:
            return "unbounded", None
        if status != _kernels.OPTIMAL:
            return "failed", None

    x = np.zeros(ncol)
    x[basis] = T2[:-1, -1]
    x = np.maximum(x, 0.0)
    return "optimal", x[:n] - x[n:2 * n]


_CACHE: dict[bytes, Feasibility] = {}
_CACHE_LOCK = threading.Lock()
_CACHE_MAX = 200_000


def lp_feasible(cs: ConstraintSet, *, use_cache: bool = True) -> Feasibility:
    """Feasibility of ``cs`` with a witness point when feasible.

    A numerically degenerate solve is reported as infeasible with a warning.
    Results are memoised on the exact constraint rows.
    """
    key = cs.signature() if use_cache else None
    if key is not None:
        hit = _CACHE.get(key)
        if hit is not None:
            return hit
    status, p = _solve(cs)
    if status == "failed":
        warnings.warn("LP feasibility solve did not converge; reporting infeasible", RuntimeWarning)
        res = Feasibility(False, None)
    elif status == "infeasible":
        res = Feasibility(False, None)
    else:
        if cs.violation(p) > 1e-7:
            warnings.warn("LP witness violates constraints beyond tolerance; reporting infeasible",
                          RuntimeWarning)
            res = Feasibility(False, None)
        else:
            p.setflags(write=False)
            res = Feasibility(True, p)
    if key is not None:
        with _CACHE_LOCK:
            if len(_CACHE) >= _CACHE_MAX:
                _CACHE.clear()
            _CACHE[key] = res
    return res


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def lp_extremize(objective, cs: ConstraintSet, sense: str = "max"):
    """Optimise ``objective . p`` over ``cs``; returns ``(value, argument)``."""
    obj = np.asarray(objective, float)
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    sign = -1.0 if sense == "max" else 1.0
    status, p = _solve(cs, sign * obj)
    if status == "infeasible":
        raise InfeasibleError("constraint set is empty")
    if status == "unbounded":
        raise ValueError("objective is unbounded over the constraint set")
    if status == "failed":
        raise RuntimeError("LP solve did not converge")
    return float(obj @ p), p


def affine_dimension(cs: ConstraintSet, tol: float = 1e-7) -> int:
    """Dimension of the affine hull of ``cs`` (-1 when empty).

    Probes directions orthogonal to the span found so far.  If a direction is
    constant over the set, it is orthogonal to the whole hull; a direction with
    spread yields a new independent displacement.
    """
    feas = lp_feasible(cs)
    if not feas:
        return -1
    n = cs.dim
    span = np.zeros((0, n))
    while span.shape[0] < n:
        if span.shape[0]:
            _, s, vt = np.linalg.svd(span)
            rank = int((s > tol).sum())
            complement = vt[rank:]
        else:
            complement = np.eye(n)
        grew = False
        for q in complement:
            hi, p_hi = lp_extremize(q, cs, "max")
            lo, p_lo = lp_extremize(q, cs, "min")
            if hi - lo > tol:
                span = np.vstack([span, p_hi - p_lo])
                grew = True
                break
        if not grew:
            break
    if span.shape[0] == 0:
        return 0
    return int(np.linalg.matrix_rank(span, tol=tol))


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------

def least_norm_solve(A, b, tol: float = 1e-9) -> np.ndarray:
    """Minimum 2-norm ``x`` with ``A x = b``; raises :class:`NoSolution` if inconsistent."""
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float)
    x = np.linalg.pinv(A, rcond=1e-12) @ b
    x[np.abs(x) < 1e-14 * max(1.0, float(np.abs(b).max(initial=0.0)))] = 0.0
    if np.max(np.abs(A @ x - b), initial=0.0) > tol:
        raise NoSolution("system is inconsistent")
    return x


def in_direct_sum(target, blocks, tol: float = 1e-9) -> bool:
    """Whether ``target`` lies in ``Im(S_1^T) + ... + Im(S_k^T)``."""
    target = np.asarray(target, float)
    if not np.any(np.abs(target) > tol):
        return True
    if not blocks:
        return False
    basis = np.hstack([np.asarray(S, float).T for S in blocks])
    r0 = np.linalg.matrix_rank(basis, tol=tol)
    r1 = np.linalg.matrix_rank(np.column_stack([basis, target]), tol=tol)
    return r1 == r0


def rank1_inverse_update(G_inv, x) -> np.ndarray:
    """Inverse of ``G + x x^T`` from ``G^{-1}`` (Sherman-Morrison)."""
    G_inv = np.asarray(G_inv, float)
    x = np.asarray(x, float)
    if 1.0 + float(x @ G_inv @ x) <= 1e-12:
        raise np.linalg.LinAlgError("Sherman-Morrison denominator is not positive; G_inv is corrupted")
    out, _ = _kernels.sherman_morrison(G_inv, x)
    return out

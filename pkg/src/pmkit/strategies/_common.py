"""Machinery shared by the CBP family: per-pair tables and plausible sets."""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..numerics import ConstraintSet, lp_feasible
from ..structure import GameStructure, Observability, ObservabilityError


@dataclass(frozen=True)
class RandomizationConfig:
    """Discretised truncated Gaussian over ``[A, B]``; ``B`` is given per round.

    ``tail="epsilon"`` draws ``B`` with probability ``tail_eps``;
    ``tail="residual"`` normalises the density over all bins and gives ``B``
    the leftover mass, which is at least ``tail_eps``.
    """

    a_lo: float = 0.0
    k_bins: int = 5
    tail_eps: float = 1e-7
    sigma: float = 1.0
    tail: str = "epsilon"

    def __post_init__(self):
        if int(self.k_bins) != self.k_bins or self.k_bins < 1:
            raise ValueError("k_bins must be a positive integer")
        if not 0.0 < self.tail_eps < 1.0:
            raise ValueError("tail_eps must lie in (0, 1)")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.a_lo > 0:
            raise ValueError("a_lo must be <= 0")
        if self.tail not in ("epsilon", "residual"):
            raise ValueError("tail must be 'epsilon' or 'residual'")

    def bins(self, b_hi: float):
        """``(rho, p)``: support points and their probabilities."""
        return _kernels.bin_probabilities(
            float(self.a_lo), float(b_hi), int(self.k_bins), float(self.tail_eps), float(self.sigma),
            self.tail == "residual",
        )

    def draw(self, b_hi: float, rng, size: int) -> np.ndarray:
        u = rng.random(size)
        return _kernels.sample_z(
            float(self.a_lo), float(b_hi), int(self.k_bins), float(self.tail_eps), float(self.sigma), u,
            self.tail == "residual",
        )


def sample_z(cfg: RandomizationConfig, b_hi: float, rng) -> float:
    """One draw of the randomised confidence scale ``Z``."""
    return float(cfg.draw(b_hi, rng, 1)[0])


def exploration_rate(t: int, alpha: float) -> float:
    """``f(t) = alpha^(1/3) t^(2/3) log(t)^(1/3)``."""
    if t <= 1:
        return 0.0
    return alpha ** (1 / 3) * t ** (2 / 3) * math.log(t) ** (1 / 3)


@dataclass(frozen=True)
class Plausible:
    actions: frozenset
    pairs: tuple  # indices into PairTables.pairs
    fallback: bool
    base_mask: np.ndarray  # P(t) | N+(t)
    v_mask: np.ndarray  # V(t)


class PairTables:
    """Dense per-pair views of a :class:`GameStructure`.

    Pairs are the neighbour pairs ``(i, j)`` with ``i < j``; rows of
    ``obs_mat`` act on the concatenation of all per-action symbol vectors.
    """

    def __init__(self, structure: GameStructure):
        if structure.observability is Observability.NONE:
            raise ObservabilityError(
                f"game {structure.game.name!r} is not globally observable; CBP does not apply"
            )
        game = structure.game
        self.cells = structure.cells  # no back-reference: tables are cached weakly on the structure
        self.game = game
        N = game.n_actions
        sig = game.symbols_per_action
        self.sigma = sig.astype(np.float64)
        self.offsets = np.concatenate([[0], np.cumsum(sig)]).astype(np.int64)
        self.row_action = np.repeat(np.arange(N), sig).astype(np.int64)
        self.pairs = tuple(structure.neighbor_pairs)
        P = len(self.pairs)
        R = int(self.offsets[-1])
        self.obs_mat = np.zeros((P, R))
        self.winf_mat = np.zeros((P, N))
        self.w2_mat = np.zeros((P, N))
        self.diff = np.zeros((P, game.n_outcomes))
        self.pair_nplus = []
        self.pair_v = []
        for k, (i, j) in enumerate(self.pairs):
            self.diff[k] = game.loss[i] - game.loss[j]
            V = structure.observer_sets[(i, j)]
            for a in V:
                v = structure.observer_vectors[(i, j, a)]
                self.obs_mat[k, self.offsets[a]:self.offsets[a + 1]] = v
                if v.size:
                    self.winf_mat[k, a] = np.max(np.abs(v))
                    self.w2_mat[k, a] = np.linalg.norm(v)
            self.pair_nplus.append(frozenset(structure.nplus[(i, j)]))
            self.pair_v.append(frozenset(V))
        self.weights = np.asarray(structure.weights, dtype=np.float64)
        self.eta = self.weights ** (2 / 3)
        self.pareto = tuple(sorted(structure.pareto))
        self._simplex = ConstraintSet.simplex(game.n_outcomes)
        self._cache: dict[bytes, Plausible] = {}

    # -- D(t) and plausible sets ------------------------------------------------

    def halfspaces(self, signs) -> ConstraintSet:
        """``D(t)``: strict rows ``s (L_i - L_j) p > 0`` for each nonzero sign ``s``."""
        signs = np.asarray(signs)
        idx = np.flatnonzero(signs)
        D = self._simplex
        if idx.size:
            D = D.with_le(-signs[idx, None] * self.diff[idx], np.zeros(idx.size), strict=True)
        return D

    def plausible_from(self, D: ConstraintSet) -> tuple[frozenset, tuple, bool]:
        """``(P(t), N(t) as pair indices, fallback)`` for a given ``D(t)``."""
        cells = self.cells
        if not lp_feasible(D):
            return frozenset(self.pareto), tuple(range(len(self.pairs))), True
        P_t = frozenset(i for i in self.pareto if lp_feasible(cells[i].intersect(D)))
        N_t = tuple(
            k for k, (i, j) in enumerate(self.pairs)
            if i in P_t and j in P_t and lp_feasible(cells[i].intersect(cells[j]).intersect(D))
        )
        if len(P_t) == 1:
            assert not N_t, "single plausible action cannot have plausible neighbours"
        return P_t, N_t, False

    def plausible(self, signs) -> Plausible:
        """Cached plausible sets for a sign pattern (``-1, 0, +1`` per pair)."""
        signs = np.asarray(signs, dtype=np.int8)
        key = signs.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            P_t, N_t, fallback = self.plausible_from(self.halfspaces(signs))
            N = self.game.n_actions
            base = np.zeros(N, bool)
            vmask = np.zeros(N, bool)
            base[list(P_t)] = True
            for k in N_t:
                base[list(self.pair_nplus[k])] = True
                vmask[list(self.pair_v[k])] = True
            base.setflags(write=False)
            vmask.setflags(write=False)
            hit = Plausible(P_t, N_t, fallback, base, vmask)
            self._cache[key] = hit
        return hit


_TABLES: "weakref.WeakKeyDictionary[GameStructure, PairTables]" = weakref.WeakKeyDictionary()


def tables_for(structure: GameStructure) -> PairTables:
    tab = _TABLES.get(structure)
    if tab is None:
        tab = PairTables(structure)
        _TABLES[structure] = tab
    return tab


def argmax_lowest(scores: np.ndarray, mask: np.ndarray) -> int:
    """Index of the largest score inside ``mask``; ties go to the lowest index."""
    masked = np.where(mask, scores, -np.inf)
    return int(np.argmax(masked))

"""CBP and RandCBP for stochastic (non-contextual) partial monitoring."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..core import Game, SymbolObservation
from ..numerics import ConstraintSet
from ..structure import GameStructure, analyze
from ._common import (
    PairTables,
    RandomizationConfig,
    argmax_lowest,
    exploration_rate,
    sample_z,
    tables_for,
)

__all__ = [
    "CBP",
    "CbpState",
    "RandomizationConfig",
    "build_halfspaces",
    "cbp_step",
    "cbp_update",
    "delta_hat",
    "plausible_sets",
    "sample_z",
    "width_deterministic",
    "width_randomized",
]


@dataclass
class CbpState:
    """Play counts and per-symbol tallies.

    ``t`` is the number of completed rounds.  Tallies of all actions live in
    one flat vector; :meth:`tally` gives the per-action view.
    """

    counts: np.ndarray
    nu: np.ndarray
    offsets: np.ndarray
    alpha: float = 1.01
    t: int = 0
    fallbacks: int = 0

    @classmethod
    def fresh(cls, game: Game, alpha: float = 1.01) -> "CbpState":
        if not alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        sig = game.symbols_per_action
        offsets = np.concatenate([[0], np.cumsum(sig)]).astype(np.int64)
        return cls(
            counts=np.zeros(game.n_actions, dtype=np.int64),
            nu=np.zeros(int(offsets[-1])),
            offsets=offsets,
            alpha=float(alpha),
        )

    def tally(self, a: int) -> np.ndarray:
        return self.nu[self.offsets[a]:self.offsets[a + 1]]

    def f(self, t: int) -> float:
        return exploration_rate(t, self.alpha)


def _pair_index(tab: PairTables, pair) -> tuple[int, float]:
    """Row of ``pair`` in the tables and the orientation sign."""
    i, j = pair
    try:
        return tab.pairs.index((i, j)), 1.0
    except ValueError:
        pass
    try:
        return tab.pairs.index((j, i)), -1.0
    except ValueError:
        raise KeyError(f"{pair} is not a neighbour pair") from None


def delta_hat(game: Game, structure: GameStructure, state: CbpState, pair) -> float:
    """Plug-in estimate of ``(L_i - L_j) p*`` from the tallies."""
    tab = tables_for(structure)
    k, s = _pair_index(tab, pair)
    V = structure.observer_sets[(pair[0], pair[1])]
    if np.any(state.counts[list(V)] < 1):
        raise ZeroDivisionError("every observer action must have been played at least once")
    freq = state.nu / state.counts[tab.row_action].clip(min=1)
    return s * float(tab.obs_mat[k] @ freq)


def _width_base(tab: PairTables, state: CbpState, k: int) -> float:
    row = tab.winf_mat[k]
    used = row != 0
    return float(np.sum(row[used] / np.sqrt(state.counts[used])))


def width_randomized(structure: GameStructure, state: CbpState, pair, z: float) -> float:
    """``sum_a ||v_ija||_inf z / sqrt(n_a)``."""
    tab = tables_for(structure)
    k, _ = _pair_index(tab, pair)
    return _width_base(tab, state, k) * float(z)


def width_deterministic(structure: GameStructure, state: CbpState, pair, t: int | None = None) -> float:
    """``sum_a ||v_ija||_inf sqrt(alpha log t / n_a)``; ``t`` defaults to the next round."""
    t = state.t + 1 if t is None else t
    return width_randomized(structure, state, pair, math.sqrt(state.alpha * math.log(t)))


def build_halfspaces(game: Game, confident) -> ConstraintSet:
    """``D(t)`` from ``[((i, j), sign), ...]``: ``sign (L_i - L_j) p > 0`` on the simplex."""
    D = ConstraintSet.simplex(game.n_outcomes)
    rows = []
    for (i, j), s in confident:
        if s == 0:
            continue
        rows.append(-np.sign(s) * (game.loss[i] - game.loss[j]))
    if rows:
        D = D.with_le(np.array(rows), np.zeros(len(rows)), strict=True)
    return D


def plausible_sets(game: Game, structure: GameStructure, D: ConstraintSet, *, return_fallback=False):
    """``(P(t), N(t))`` given ``D(t)``; falls back to all of ``(P, N)`` when ``D`` is empty."""
    tab = tables_for(structure)
    P_t, N_t, fallback = tab.plausible_from(D)
    pairs = frozenset(tab.pairs[k] for k in N_t)
    if return_fallback:
        return P_t, pairs, fallback
    return P_t, pairs


@dataclass
class StepInfo:
    """Diagnostics of the last decision (not needed by the algorithm)."""

    delta: np.ndarray | None = None
    width: np.ndarray | None = None
    confident: np.ndarray | None = None
    plausible: frozenset = field(default_factory=frozenset)
    fallback: bool = False


def _step(tab: PairTables, state: CbpState, cfg: RandomizationConfig | None, rng, info=None) -> int:
    N = tab.game.n_actions
    t = state.t + 1
    if t <= N:
        return t - 1
    counts = state.counts.astype(np.float64)
    delta, base = _kernels.cbp_pair_stats(tab.obs_mat, tab.winf_mat, state.nu, tab.row_action, counts)
    b_hi = math.sqrt(state.alpha * math.log(t))
    if cfg is None:
        width = base * b_hi
    else:
        width = base * cfg.draw(b_hi, rng, len(base))
    confident = np.abs(delta) > width
    signs = np.where(confident, np.sign(delta), 0.0).astype(np.int8)
    pl = tab.plausible(signs)
    if pl.fallback:
        state.fallbacks += 1
    under = counts <= tab.eta * state.f(t)
    mask = pl.base_mask | (pl.v_mask & under)
    if info is not None:
        info.delta, info.width, info.confident = delta, width, confident
        info.plausible, info.fallback = pl.actions, pl.fallback
    return argmax_lowest(tab.weights ** 2 / counts, mask)


def cbp_step(game: Game, structure: GameStructure, state: CbpState,
             cfg: RandomizationConfig | None = None, rng=None) -> int:
    """Action for round ``state.t + 1``; ``cfg=None`` is deterministic CBP."""
    if cfg is not None and rng is None:
        raise ValueError("randomised step needs an rng")
    return _step(tables_for(structure), state, cfg, rng)


def cbp_update(state: CbpState, action: int, observation: SymbolObservation) -> CbpState:
    if observation.action != action:
        raise ValueError("observation belongs to a different action")
    state.counts[action] += 1
    state.nu[state.offsets[action] + observation.symbol_index] += 1.0
    state.t += 1
    return state


class CBP:
    """Stateful CBP / RandCBP policy.

    Pass a :class:`RandomizationConfig` to get RandCBP; ``None`` gives the
    deterministic confidence bound.
    """

    contextual = False

    def __init__(self, game: Game, structure: GameStructure | None = None, *, alpha: float = 1.01,
                 randomization: RandomizationConfig | None = None, rng=None, name: str | None = None):
        self.game = game
        self.structure = structure if structure is not None else analyze(game)
        self.tables = tables_for(self.structure)
        self.cfg = randomization
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = CbpState.fresh(game, alpha)
        self.info = StepInfo()
        self.name = name or ("RandCBP" if randomization is not None else "CBP")

    def select(self, x=None) -> int:
        return _step(self.tables, self.state, self.cfg, self.rng, self.info)

    def update(self, action: int, symbol_index: int, x=None) -> None:
        st = self.state
        st.counts[action] += 1
        st.nu[st.offsets[action] + symbol_index] += 1.0
        st.t += 1

"""CBPside* and RandCBPside* for linear contextual partial monitoring."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import Game, SymbolObservation
from ..structure import GameStructure, analyze
from ._common import PairTables, RandomizationConfig, argmax_lowest, exploration_rate, tables_for

__all__ = [
    "CBPside",
    "CbpSideState",
    "cbpside_step",
    "confidence_scale",
    "contextual_width",
    "predict_pi",
    "pseudo_count",
    "ridge_update",
]


@dataclass
class CbpSideState:
    """Per-action ridge statistics.

    ``G_inv[a]`` is ``(lam I + sum x x^T)^{-1}`` over the rounds where ``a``
    was played and ``B[offsets[a]:offsets[a+1]]`` accumulates ``e(y) x^T``.
    """

    G_inv: np.ndarray
    B: np.ndarray
    offsets: np.ndarray
    dim: int
    lam: float = 0.05
    alpha: float = 1.01
    t: int = 0
    fallbacks: int = 0

    @classmethod
    def fresh(cls, game: Game, dim: int, lam: float = 0.05, alpha: float = 1.01) -> "CbpSideState":
        if dim < 1:
            raise ValueError("context dimension must be positive")
        if not lam > 0:
            raise ValueError("lam must be positive")
        if not alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        sig = game.symbols_per_action
        offsets = np.concatenate([[0], np.cumsum(sig)]).astype(np.int64)
        G_inv = np.repeat((np.eye(dim) / lam)[None], game.n_actions, axis=0)
        return cls(G_inv, np.zeros((int(offsets[-1]), dim)), offsets, dim, float(lam), float(alpha))

    def block(self, a: int) -> np.ndarray:
        return self.B[self.offsets[a]:self.offsets[a + 1]]

    def theta_hat(self, a: int) -> np.ndarray:
        """``B_a G_a^{-1}``, computed on demand."""
        return self.block(a) @ self.G_inv[a]

    def f(self, t: int) -> float:
        return exploration_rate(t, self.alpha)


def ridge_update(state: CbpSideState, action: int, x, obs: SymbolObservation) -> CbpSideState:
    x = np.asarray(x, dtype=np.float64)
    if obs.action != action:
        raise ValueError("observation belongs to a different action")
    _update(state, action, x, obs.symbol_index)
    return state


def _update(state: CbpSideState, a: int, x: np.ndarray, symbol_index: int) -> None:
    state.G_inv[a] = _kernels.sherman_morrison(state.G_inv[a], x)[0]
    state.B[state.offsets[a] + symbol_index] += x
    state.t += 1


def predict_pi(state: CbpSideState, a: int, x) -> np.ndarray:
    """Raw linear prediction of the feedback distribution; not clamped."""
    return state.theta_hat(a) @ np.asarray(x, dtype=np.float64)


def confidence_scale(d: int, t: int) -> float:
    """``sqrt(max(0, (d + 4) log t))``."""
    return math.sqrt(max(0.0, (d + 4) * math.log(t)))


def contextual_width(state: CbpSideState, a: int, x, *, t: int | None = None, z: float | None = None,
                     sigma_a: int | None = None) -> float:
    """``sigma_a (scale + sigma_a) ||x||_{G_a^{-1}}``.

    The scale is ``z`` when given, else the deterministic scale at round
    ``t`` (default: the next round).
    """
    x = np.asarray(x, dtype=np.float64)
    if sigma_a is None:
        sigma_a = int(state.offsets[a + 1] - state.offsets[a])
    if z is None:
        z = confidence_scale(state.dim, state.t + 1 if t is None else t)
    quad = max(0.0, float(x @ state.G_inv[a] @ x))
    return sigma_a * (z + sigma_a) * math.sqrt(quad)


def pseudo_count(state: CbpSideState, a: int, x) -> float:
    """``1 / ||x||^2_{G_a^{-1}}``; infinite for the zero context."""
    x = np.asarray(x, dtype=np.float64)
    quad = float(x @ state.G_inv[a] @ x)
    return math.inf if quad <= 0.0 else 1.0 / quad


def _step(tab: PairTables, state: CbpSideState, x: np.ndarray, cfg: RandomizationConfig | None, rng,
          info=None) -> int:
    N = tab.game.n_actions
    t = state.t + 1
    if t <= N:
        return t - 1
    pi_flat, quad = _kernels.contextual_stats(state.G_inv, state.B, tab.row_action, x)
    quad = np.maximum(quad, 0.0)
    b_hi = confidence_scale(state.dim, t)
    if cfg is None:
        scale = b_hi
    else:
        scale = cfg.draw(b_hi, rng, N)
    w = tab.sigma * (scale + tab.sigma) * np.sqrt(quad)
    delta = tab.obs_mat @ pi_flat
    width = tab.w2_mat @ w
    confident = np.abs(delta) > width
    signs = np.where(confident, np.sign(delta), 0.0).astype(np.int8)
    pl = tab.plausible(signs)
    if pl.fallback:
        state.fallbacks += 1
    with np.errstate(divide="ignore"):
        pcount = np.where(quad > 0.0, 1.0 / quad, np.inf)
    under = pcount < tab.eta * state.f(t)
    mask = pl.base_mask | (pl.v_mask & under)
    if info is not None:
        info.update(delta=delta, width=width, confident=confident, plausible=pl.actions, fallback=pl.fallback)
    return argmax_lowest(tab.weights * w, mask)


def cbpside_step(game: Game, structure: GameStructure, state: CbpSideState, x,
                 cfg: RandomizationConfig | None = None, rng=None) -> int:
    """Action for round ``state.t + 1`` given context ``x``; ``cfg=None`` is CBPside*."""
    if cfg is not None and rng is None:
        raise ValueError("randomised step needs an rng")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.dim,):
        raise ValueError(f"context must have shape ({state.dim},)")
    return _step(tables_for(structure), state, x, cfg, rng)


class CBPside:
    """Stateful CBPside* / RandCBPside* policy."""

    contextual = True

    def __init__(self, game: Game, dim: int, structure: GameStructure | None = None, *, alpha: float = 1.01,
                 lam: float = 0.05, randomization: RandomizationConfig | None = None, rng=None,
                 name: str | None = None):
        self.game = game
        self.structure = structure if structure is not None else analyze(game)
        self.tables = tables_for(self.structure)
        self.cfg = randomization
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = CbpSideState.fresh(game, dim, lam, alpha)
        self.info: dict = {}
        self.name = name or ("RandCBPside*" if randomization is not None else "CBPside*")

    def select(self, x=None) -> int:
        return _step(self.tables, self.state, np.asarray(x, dtype=np.float64), self.cfg, self.rng, self.info)

    def update(self, action: int, symbol_index: int, x=None) -> None:
        _update(self.state, action, np.asarray(x, dtype=np.float64), symbol_index)

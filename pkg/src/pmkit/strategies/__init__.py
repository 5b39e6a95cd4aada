"""Strategies: CBP family and simple baselines."""
from __future__ import annotations

from ..core import Game
from ..structure import GameStructure, analyze
from ._common import RandomizationConfig, exploration_rate, sample_z
from .baselines import FixedAction, Oracle, UniformRandom
from .cbp import CBP, CbpState
from .cbpside import CBPside, CbpSideState

__all__ = [
    "CBP",
    "CBPside",
    "CbpSideState",
    "CbpState",
    "FixedAction",
    "Oracle",
    "RandomizationConfig",
    "UniformRandom",
    "exploration_rate",
    "make_strategy",
    "sample_z",
]

KNOWN = ("cbp", "randcbp", "cbpside", "randcbpside", "fixed", "uniform", "oracle")


def _randomization(cfg: dict) -> RandomizationConfig:
    return RandomizationConfig(
        a_lo=float(cfg.get("A", 0.0)),
        k_bins=int(cfg.get("K", 5)),
        tail_eps=float(cfg.get("eps", 1e-7)),
        sigma=float(cfg.get("sigma", 1.0)),
        tail=str(cfg.get("tail", "epsilon")),
    )


def make_strategy(cfg: dict | str, game: Game, structure: GameStructure | None = None, *, rng=None,
                  dim: int | None = None, best=None):
    """Build a policy from a config block such as ``{"strategy": "randcbp", "alpha": 1.01}``.

    ``dim`` is required for the contextual strategies and ``best`` (a callable
    returning the optimal action for a context) for ``oracle``.
    """
    if isinstance(cfg, str):
        cfg = {"strategy": cfg}
    kind = str(cfg.get("strategy", "")).lower()
    name = cfg.get("name")
    alpha = float(cfg.get("alpha", 1.01))
    if kind in ("cbp", "randcbp", "cbpside", "randcbpside") and structure is None:
        structure = analyze(game)
    if kind == "cbp":
        return CBP(game, structure, alpha=alpha, rng=rng, name=name)
    if kind == "randcbp":
        return CBP(game, structure, alpha=alpha, randomization=_randomization(cfg), rng=rng, name=name)
    if kind in ("cbpside", "randcbpside"):
        if dim is None:
            raise ValueError(f"{kind} needs the context dimension")
        rand = _randomization(cfg) if kind == "randcbpside" else None
        return CBPside(game, dim, structure, alpha=alpha, lam=float(cfg.get("lambda", 0.05)),
                       randomization=rand, rng=rng, name=name)
    if kind == "fixed":
        return FixedAction(int(cfg.get("action", 0)), name=name)
    if kind == "uniform":
        return UniformRandom(game.n_actions, rng=rng, name=name or "uniform")
    if kind == "oracle":
        if best is None:
            raise ValueError("oracle needs the environment's best-action function")
        return Oracle(best, name=name or "oracle")
    raise ValueError(f"unknown strategy {kind!r}; expected one of {', '.join(KNOWN)}")

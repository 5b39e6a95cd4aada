"""Seeded experiment runs and their summary statistics."""
from __future__ import annotations

import functools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from ..core import Game
from ..environments import make_env
from ..strategies import make_strategy
from ..structure import analyze

__all__ = [
    "ExperimentSummary",
    "RunRecord",
    "StrategyStats",
    "Z99",
    "replicate",
    "run_game",
    "strategy_label",
    "summarize",
    "welch_one_sided",
]

Z99 = 2.5758  # two-sided 99% normal quantile


@functools.lru_cache(maxsize=64)
def cached_structure(game: Game):
    return analyze(game)


def strategy_label(cfg) -> str:
    if isinstance(cfg, str):
        return cfg
    return str(cfg.get("name") or cfg.get("strategy"))


@dataclass
class RunRecord:
    seed: int
    config: dict
    actions: np.ndarray
    cum_regret: np.ndarray
    wall_time: float
    fallbacks: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def final_regret(self) -> float:
        return float(self.cum_regret[-1]) if self.cum_regret.size else 0.0


def _streams(seed: int):
    env_ss, strat_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(strat_ss)


def run_game(strategy_cfg, env_cfg: dict, horizon: int, seed: int) -> RunRecord:
    """One run; the environment instance depends on ``seed`` only, not on the strategy."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    env_rng, strat_rng = _streams(seed)
    env = make_env(env_cfg, env_rng)
    game = env.game
    kind = strategy_cfg if isinstance(strategy_cfg, str) else strategy_cfg.get("strategy", "")
    structure = cached_structure(game) if "cbp" in str(kind).lower() else None
    policy = make_strategy(strategy_cfg, game, structure, rng=strat_rng,
                           dim=getattr(env, "dim", None), best=env.best)
    actions = np.empty(horizon, dtype=np.int64)
    regret = np.empty(horizon)
    contextual = env.contextual
    t0 = time.perf_counter()
    for t in range(horizon):
        x = env.context() if contextual else None
        a = policy.select(x)
        sym, r = env.play(a)
        policy.update(a, sym, x)
        actions[t] = a
        regret[t] = r
    wall = time.perf_counter() - t0
    state = getattr(policy, "state", None)
    extra = {}
    if hasattr(env, "p_star"):
        extra["p_star"] = env.p_star.tolist()
    return RunRecord(
        seed=int(seed),
        config={"strategy": strategy_cfg, "env": env_cfg, "horizon": horizon},
        actions=actions,
        cum_regret=np.cumsum(regret),
        wall_time=wall,
        fallbacks=int(getattr(state, "fallbacks", 0)),
        extra=extra,
    )


def welch_one_sided(sample_a, sample_b) -> float:
    """p-value of Welch's test for ``mean(a) < mean(b)``."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0.0:
        if ma == mb:
            return 0.5
        return 0.0 if ma < mb else 1.0
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    tail = 0.5 * float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return tail if t < 0 else 1.0 - tail


@dataclass
class StrategyStats:
    name: str
    mean: float
    std: float
    median: float
    ci99: float
    wins: int
    p_value: float | None
    n_runs: int
    fallbacks: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperimentSummary:
    reference: str
    horizon: int
    strategies: dict[str, StrategyStats]

    def as_dict(self) -> dict:
        return {
            "reference": self.reference,
            "horizon": self.horizon,
            "strategies": {k: v.as_dict() for k, v in self.strategies.items()},
        }

    def table(self) -> str:
        head = f"{'strategy':<16}{'mean':>12}{'std':>12}{'median':>12}{'ci99':>10}{'pvalue':>10}{'wins':>6}"
        rows = [head]
        for s in self.strategies.values():
            p = "-" if s.p_value is None else f"{s.p_value:.3g}"
            rows.append(f"{s.name:<16}{s.mean:>12.3f}{s.std:>12.3f}{s.median:>12.3f}{s.ci99:>10.3f}{p:>10}{s.wins:>6}")
        return "\n".join(rows)


def summarize(finals: dict[str, np.ndarray], reference: str | None = None, horizon: int = 0,
              fallbacks: dict[str, int] | None = None) -> ExperimentSummary:
    """Statistics over final regrets; runs are aligned by index across strategies."""
    names = list(finals)
    if not names:
        raise ValueError("no strategies to summarise")
    reference = reference or names[0]
    if reference not in finals:
        raise KeyError(f"reference strategy {reference!r} not among {names}")
    mat = np.vstack([np.asarray(finals[n], dtype=np.float64) for n in names])
    n = mat.shape[1]
    best = mat.min(axis=0)
    wins = (mat == best).sum(axis=1)  # ties count for every tied strategy
    out = {}
    for k, name in enumerate(names):
        x = mat[k]
        std = float(x.std(ddof=1)) if n > 1 else 0.0
        if name == reference:
            p = 1.0
        elif n > 1:
            p = welch_one_sided(finals[reference], x)
        else:
            p = None
        out[name] = StrategyStats(
            name=name, mean=float(x.mean()), std=std, median=float(np.median(x)),
            ci99=Z99 * std / math.sqrt(n), wins=int(wins[k]), p_value=p, n_runs=n,
            fallbacks=int((fallbacks or {}).get(name, 0)),
        )
    return ExperimentSummary(reference, horizon, out)


def _run_job(args):
    return run_game(*args)


def replicate(config: dict, n_runs: int | None = None, seeds=None, jobs: int = 1):
    """Run every strategy of ``config`` on the same seeds.

    ``config`` holds ``env`` (or ``game``), ``strategies``, ``horizon`` and
    optionally ``runs``, ``seed`` and ``reference``.  Returns
    ``(records_by_strategy, summary)``.
    """
    horizon = int(config["horizon"])
    env_cfg = dict(config.get("env") or {"env": "bernoulli"})
    if "game" in config and "game" not in env_cfg:
        env_cfg["game"] = config["game"]
    if seeds is None:
        n_runs = int(n_runs if n_runs is not None else config.get("runs", 1))
        base = int(config.get("seed", 0))
        seeds = [base + r for r in range(n_runs)]
    seeds = [int(s) for s in seeds]
    strategies = config["strategies"]
    labels = [strategy_label(s) for s in strategies]
    if len(set(labels)) != len(labels):
        raise ValueError("strategy labels must be unique; add a 'name' field")
    jobs_list = [(s, env_cfg, horizon, seed) for s in strategies for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_job, jobs_list, chunksize=1))
    else:
        results = [_run_job(j) for j in jobs_list]
    records = {}
    for k, label in enumerate(labels):
        records[label] = results[k * len(seeds):(k + 1) * len(seeds)]
    finals = {label: np.array([r.final_regret for r in recs]) for label, recs in records.items()}
    fallbacks = {label: sum(r.fallbacks for r in recs) for label, recs in records.items()}
    summary = summarize(finals, config.get("reference"), horizon, fallbacks)
    return records, summary

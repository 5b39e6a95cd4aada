"""Classifier monitoring with one tau-detection learner per predicted class."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from ..core import tau_detection
from ..environments import BernoulliPmEnv, ClassifierStream, generate_classifier
from ..strategies import CBP, FixedAction, RandomizationConfig
from .runner import cached_structure

__all__ = [
    "FAMILIES",
    "MonitorReport",
    "MonitorRow",
    "f1_score",
    "monitor_experiment",
    "monitor_run",
    "wald_budget",
]

FAMILIES = ("C-RandCBP", "C-CBP", "Explore-fully")
VERIFY, PASS = 0, 1


def wald_budget(tau: float, C: int, zeta: float = 0.01, n_actions: int = 2) -> tuple[int, int]:
    """``(per_class, total)`` verification budget from the Wald interval.

    Margin ``E = tau / 10``, prior error ``p = 0.1 / C`` per class, and the
    normal quantile rounded to four decimals.  ``n_actions`` initial rounds
    are added per class.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    if C < 1:
        raise ValueError("C must be positive")
    z = round(float(ndtri(1.0 - zeta / 2.0)), 4)
    pbar = 0.1 / C
    E = tau / 10.0
    n = z * z * pbar * (1.0 - pbar) / (E * E)
    per_class = math.ceil(n - 1e-9) + n_actions
    return per_class, C * per_class


def f1_score(predicted, truth) -> float:
    """F1 of flagged classes; 1.0 when both sets are empty."""
    predicted, truth = set(predicted), set(truth)
    if not predicted and not truth:
        return 1.0
    tp = len(predicted & truth)
    return 2 * tp / (2 * tp + len(predicted - truth) + len(truth - predicted))


@dataclass
class MonitorRow:
    family: str
    tau: float
    seed: int
    verifications: int
    per_class_verifications: list
    flags: list
    truth: list
    f1: float
    budget: int


def _policy(family: str, game, rng, alpha: float, randomization: RandomizationConfig):
    if family == "Explore-fully":
        return FixedAction(VERIFY, name=family)
    structure = cached_structure(game)
    if family == "C-CBP":
        return CBP(game, structure, alpha=alpha, rng=rng, name=family)
    if family == "C-RandCBP":
        return CBP(game, structure, alpha=alpha, randomization=randomization, rng=rng, name=family)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def monitor_run(family: str, stream: ClassifierStream, tau: float, seed: int, *, alpha: float = 1.01,
                randomization: RandomizationConfig | None = None, zeta: float = 0.01) -> MonitorRow:
    """Run ``family`` on every predicted class for the per-class Wald budget."""
    randomization = randomization or RandomizationConfig()
    game = tau_detection(tau)
    per_class, total = wald_budget(tau, stream.n_classes, zeta)
    rates = stream.error_rates
    active = stream.predicted_dist > 0
    skipped = [c for c in range(stream.n_classes) if not active[c]]
    if skipped:
        warnings.warn(f"classes {skipped} are never predicted; excluded from F1", RuntimeWarning)
    env_seqs = np.random.SeedSequence([seed, 1]).spawn(stream.n_classes)
    pol_seqs = np.random.SeedSequence([seed, 2]).spawn(stream.n_classes)
    counts = []
    flags = []
    for c in range(stream.n_classes):
        if not active[c]:
            counts.append(0)
            continue
        env = BernoulliPmEnv(game, [rates[c], 1.0 - rates[c]], np.random.default_rng(env_seqs[c]))
        pol = _policy(family, game, np.random.default_rng(pol_seqs[c]), alpha, randomization)
        verified = errors = 0
        for _ in range(per_class):
            a = pol.select()
            sym, _ = env.play(a)
            pol.update(a, sym)
            if a == VERIFY:
                verified += 1
                errors += sym == 0  # symbol 0 of "verify" is the error signal
        counts.append(verified)
        if verified and errors / verified >= tau:
            flags.append(c)
    truth = [c for c in range(stream.n_classes) if active[c] and rates[c] >= tau]
    return MonitorRow(
        family=family, tau=float(tau), seed=int(seed), verifications=int(sum(counts)),
        per_class_verifications=counts, flags=flags, truth=truth, f1=f1_score(flags, truth), budget=total,
    )


def _describe(x) -> dict:
    x = np.asarray(x, dtype=np.float64)
    return {"mean": float(x.mean()), "median": float(np.median(x)),
            "std": float(x.std(ddof=1)) if x.size > 1 else 0.0}


@dataclass
class MonitorReport:
    C: int
    budgets: dict
    rows: list = field(default_factory=list)

    def cell(self, tau: float, family: str) -> dict:
        sel = [r for r in self.rows if r.tau == tau and r.family == family]
        if not sel:
            raise KeyError((tau, family))
        return {
            "f1": _describe([r.f1 for r in sel]),
            "verifications": _describe([r.verifications for r in sel]),
            "budget": sel[0].budget,
            "runs": len(sel),
        }

    def as_dict(self) -> dict:
        taus = sorted({r.tau for r in self.rows})
        fams = [f for f in FAMILIES if any(r.family == f for r in self.rows)]
        return {
            "C": self.C,
            "budgets": {str(t): b for t, b in self.budgets.items()},
            "summary": {str(t): {f: self.cell(t, f) for f in fams} for t in taus},
            "runs": [r.__dict__ for r in self.rows],
        }

    def table(self) -> str:
        lines = [f"{'tau':>7} {'strategy':<14}{'f1 mean':>9}{'f1 med':>8}{'f1 std':>8}"
                 f"{'verif mean':>12}{'verif med':>11}{'verif std':>11}{'budget':>9}"]
        for t in sorted({r.tau for r in self.rows}):
            for f in FAMILIES:
                if not any(r.tau == t and r.family == f for r in self.rows):
                    continue
                c = self.cell(t, f)
                lines.append(
                    f"{t:>7g} {f:<14}{c['f1']['mean']:>9.3f}{c['f1']['median']:>8.3f}{c['f1']['std']:>8.3f}"
                    f"{c['verifications']['mean']:>12.1f}{c['verifications']['median']:>11.1f}"
                    f"{c['verifications']['std']:>11.1f}{c['budget']:>9}"
                )
        return "\n".join(lines)


def _monitor_job(args):
    family, stream, tau, seed, alpha, rand = args
    return monitor_run(family, stream, tau, seed, alpha=alpha, randomization=rand)


def monitor_experiment(config: dict, runs: int | None = None, seed: int | None = None, jobs: int = 1) -> MonitorReport:
    """All (run, tau, family) combinations of a monitor config.

    Config keys: ``C``, ``tau_list``, ``balance``, ``errors``, optional
    ``strategies``, ``error_model``, ``alpha``, ``runs`` and ``seed``.  The
    classifier of a run is shared by all thresholds and strategies.
    """
    C = int(config.get("C", 10))
    taus = [float(t) for t in config.get("tau_list", [0.025, 0.05, 0.1, 0.2])]
    families = config.get("strategies", list(FAMILIES))
    runs = int(runs if runs is not None else config.get("runs", 1))
    base = int(seed if seed is not None else config.get("seed", 0))
    alpha = float(config.get("alpha", 1.01))
    rand = RandomizationConfig(
        a_lo=float(config.get("A", 0.0)), k_bins=int(config.get("K", 5)),
        tail_eps=float(config.get("eps", 1e-7)), sigma=float(config.get("sigma", 1.0)),
        tail=str(config.get("tail", "epsilon")),
    )
    jobs_list = []
    for r in range(runs):
        s = base + r
        stream = generate_classifier(
            C, config.get("balance", "balanced"), config.get("errors", "uniform"),
            np.random.default_rng(np.random.SeedSequence([s, 0])),
            error_model=config.get("error_model", "bayes"),
        )
        for tau in taus:
            for fam in families:
                jobs_list.append((fam, stream, tau, s, alpha, rand))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_monitor_job, jobs_list, chunksize=1))
    else:
        rows = [_monitor_job(j) for j in jobs_list]
    return MonitorReport(C, {t: wald_budget(t, C)[1] for t in taus}, rows)

"""Stochastic outcome generators for PM games."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Game, SymbolObservation, bundled_game, load_game_spec, observe

__all__ = [
    "BernoulliPmEnv",
    "ClassifierStream",
    "Diagnostics",
    "LinearPmEnv",
    "env_step",
    "generate_classifier",
    "make_env",
    "make_linear_env",
    "sample_instance",
    "stream_step",
]

_CHUNK = 4096


@dataclass(frozen=True)
class Diagnostics:
    outcome: int
    regret: float


def _as_distribution(p, m: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (m,):
        raise ValueError(f"distribution must have {m} entries")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("distribution must be non-negative and sum to 1")
    return p


def sample_instance(kind: str, rng) -> np.ndarray:
    """Two-outcome instance ``[p, 1 - p]``.

    ``imbalanced``: ``p`` uniform on ``[0, 0.2] u [0.8, 1]``;
    ``balanced``: ``p`` uniform on ``[0.4, 0.6]``.
    """
    if kind == "imbalanced":
        p = rng.uniform(0.0, 0.4)
        if p > 0.2:
            p += 0.6
    elif kind == "balanced":
        p = rng.uniform(0.4, 0.6)
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    return np.array([p, 1.0 - p])


class BernoulliPmEnv:
    """Outcomes drawn i.i.d. from a fixed ``p_star``."""

    contextual = False

    def __init__(self, game: Game, p_star, rng=None):
        self.game = game
        self.p_star = _as_distribution(p_star, game.n_outcomes)
        self.rng = rng if rng is not None else np.random.default_rng()
        ell = game.loss @ self.p_star
        self.expected_loss = ell
        self.optimal_action = int(np.argmin(ell))
        self.gaps = ell - ell[self.optimal_action]
        self._cdf = np.cumsum(self.p_star)
        self._cdf[-1] = 1.0
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0
        self.last_outcome = -1

    def best(self, x=None) -> int:
        return self.optimal_action

    def context(self):
        return None

    def _outcome(self) -> int:
        if self._pos >= self._buf.size:
            u = self.rng.random(_CHUNK)
            self._buf = np.searchsorted(self._cdf, u, side="right")
            self._pos = 0
        j = int(self._buf[self._pos])
        self._pos += 1
        return j

    def play(self, action: int) -> tuple[int, float]:
        """``(symbol index, expected regret of the action)`` for one round."""
        j = self._outcome()
        self.last_outcome = j
        return int(self.game.symbol_table[action, j]), float(self.gaps[action])


class LinearPmEnv:
    """Contextual outcomes with ``p*(x)`` linear in ``x``.

    ``normalization="residual"`` (default) sets ``p_m = theta_m . x`` for the
    first ``M - 1`` outcomes and gives the last outcome the remaining mass;
    ``"sum"`` divides ``theta x`` by its entry sum.  Contexts whose image is
    not a distribution are redrawn.
    """

    contextual = True

    def __init__(self, game: Game, theta, context_dist: str = "uniform", normalization: str = "residual",
                 rng=None, max_redraws: int = 1000):
        theta = np.asarray(theta, dtype=np.float64)
        M = game.n_outcomes
        if theta.ndim != 2:
            raise ValueError("theta must be a matrix")
        if normalization == "residual":
            if theta.shape[0] == M:
                theta = theta[:M - 1]
            if theta.shape[0] != M - 1:
                raise ValueError(f"theta needs {M - 1} or {M} rows")
        elif normalization == "sum":
            if theta.shape[0] != M:
                raise ValueError(f"theta needs {M} rows")
        else:
            raise ValueError(f"unknown normalization {normalization!r}")
        if context_dist not in ("uniform", "uniform_bias", "onehot"):
            raise ValueError(f"unknown context distribution {context_dist!r}")
        self.game = game
        self.theta = theta
        self.dim = theta.shape[1]
        self.context_dist = context_dist
        self.normalization = normalization
        self.rng = rng if rng is not None else np.random.default_rng()
        self.max_redraws = max_redraws
        self._cbuf = np.empty((0, self.dim))
        self._ubuf = np.empty(0)
        self._cpos = self._upos = 0
        self.x = None
        self.p = None
        self.gaps = None
        self.last_outcome = -1

    def p_of(self, x) -> np.ndarray | None:
        """``p*(x)``, or ``None`` if ``x`` does not map into the simplex."""
        z = self.theta @ np.asarray(x, dtype=np.float64)
        if self.normalization == "sum":
            s = z.sum()
            if not s > 0 or np.any(z < 0):
                return None
            return z / s
        rest = 1.0 - z.sum()
        if np.any(z < 0) or rest < 0:
            return None
        return np.append(z, rest)

    def _draw_x(self) -> np.ndarray:
        if self._cpos >= len(self._cbuf):
            if self.context_dist == "uniform":
                self._cbuf = self.rng.random((_CHUNK, self.dim))
            elif self.context_dist == "uniform_bias":
                self._cbuf = self.rng.random((_CHUNK, self.dim))
                self._cbuf[:, 0] = 1.0
            else:
                self._cbuf = np.eye(self.dim)[self.rng.integers(self.dim, size=_CHUNK)]
            self._cpos = 0
        x = self._cbuf[self._cpos]
        self._cpos += 1
        return x

    def context(self) -> np.ndarray:
        for _ in range(self.max_redraws):
            x = self._draw_x()
            p = self.p_of(x)
            if p is not None:
                break
        else:
            raise RuntimeError("could not draw a context with a valid outcome distribution")
        ell = self.game.loss @ p
        self.x, self.p = x, p
        self.gaps = ell - ell.min()
        return x

    def best(self, x=None) -> int:
        p = self.p if x is None else self.p_of(x)
        return int(np.argmin(self.game.loss @ p))

    def play(self, action: int) -> tuple[int, float]:
        if self.p is None:
            raise RuntimeError("draw a context before playing")
        if self._upos >= self._ubuf.size:
            self._ubuf = self.rng.random(_CHUNK)
            self._upos = 0
        u = self._ubuf[self._upos]
        self._upos += 1
        cdf = np.cumsum(self.p)
        j = min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
        self.last_outcome = j
        return int(self.game.symbol_table[action, j]), float(self.gaps[action])


def make_linear_env(game: Game, theta, context_dist: str = "uniform", *, normalization: str = "residual",
                    rng=None) -> LinearPmEnv:
    return LinearPmEnv(game, theta, context_dist, normalization, rng)


def env_step(env, action: int):
    """One round: ``(observation, diagnostics)`` with the hidden outcome and expected regret."""
    if not 0 <= action < env.game.n_actions:
        raise IndexError(f"action {action} out of range")
    _, regret = env.play(action)
    obs: SymbolObservation = observe(env.game, action, env.last_outcome)
    return obs, Diagnostics(env.last_outcome, regret)


# -- classifier monitoring ------------------------------------------------------

GLOBAL_ERROR_CAP = 0.10


@dataclass(frozen=True)
class ClassifierStream:
    """A black-box classifier seen through its predictions.

    ``confusion[k, c]`` is the probability of predicting ``c`` for true class
    ``k``.  ``error_model="bayes"`` defines the error rate of predicted class
    ``c`` as ``P(true != c | predicted c)``; ``"diagonal"`` uses
    ``1 - confusion[c, c]``.
    """

    n_classes: int
    class_dist: np.ndarray
    confusion: np.ndarray
    error_model: str = "bayes"

    def __post_init__(self):
        if self.error_model not in ("bayes", "diagonal"):
            raise ValueError(f"unknown error model {self.error_model!r}")
        C = self.n_classes
        if self.class_dist.shape != (C,) or self.confusion.shape != (C, C):
            raise ValueError("class_dist / confusion shapes do not match n_classes")
        if not np.allclose(self.confusion.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("confusion rows must sum to 1")

    @property
    def global_error(self) -> float:
        return float(self.class_dist @ (1.0 - np.diag(self.confusion)))

    @property
    def predicted_dist(self) -> np.ndarray:
        if self.error_model == "diagonal":
            return self.class_dist
        return self.class_dist @ self.confusion

    @property
    def error_rates(self) -> np.ndarray:
        if self.error_model == "diagonal":
            return 1.0 - np.diag(self.confusion)
        joint = self.class_dist[:, None] * self.confusion
        q = joint.sum(axis=0)
        correct = np.diag(joint)
        with np.errstate(invalid="ignore", divide="ignore"):
            rates = np.where(q > 0, 1.0 - correct / q, 0.0)
        return np.clip(rates, 0.0, 1.0)


def _confusion(rates, off_weights) -> np.ndarray:
    C = len(rates)
    M = np.zeros((C, C))
    for k in range(C):
        w = np.delete(off_weights[k], k)
        w = w / w.sum()
        M[k, np.arange(C) != k] = rates[k] * w
        M[k, k] = 1.0 - rates[k]
    return M


def generate_classifier(C: int, class_balance: str = "balanced", error_profile: str = "uniform", rng=None,
                        *, error_model: str = "bayes", max_tries: int = 10_000) -> ClassifierStream:
    """Random classifier with global error rate below 10%.

    Balanced streams have uniform true classes, imbalanced ones a
    Dirichlet(0.5) draw.  Uniform errors share one rate across classes and
    spread mistakes evenly; non-uniform errors draw per-class rates from
    Beta(0.5, 6) and Dirichlet-weighted mistake targets.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if C < 2:
        raise ValueError("need at least two classes")
    for _ in range(max_tries):
        if class_balance == "balanced":
            dist = np.full(C, 1.0 / C)
        elif class_balance == "imbalanced":
            dist = rng.dirichlet(np.full(C, 0.5))
        else:
            raise ValueError(f"unknown class balance {class_balance!r}")
        if error_profile == "uniform":
            rates = np.full(C, rng.uniform(0.0, GLOBAL_ERROR_CAP))
            off = np.ones((C, C))
        elif error_profile == "nonuniform":
            rates = rng.beta(0.5, 6.0, size=C)
            off = rng.dirichlet(np.full(C, 0.5), size=C) + 1e-12
        else:
            raise ValueError(f"unknown error profile {error_profile!r}")
        stream = ClassifierStream(C, dist, _confusion(rates, off), error_model)
        if stream.global_error < GLOBAL_ERROR_CAP:
            return stream
    raise RuntimeError("could not generate a classifier under the global error cap")


def stream_step(stream: ClassifierStream, rng) -> tuple[int, bool]:
    """One prediction: ``(predicted class, whether it is an error)``."""
    q = stream.predicted_dist
    c = int(rng.choice(stream.n_classes, p=q / q.sum()))
    return c, bool(rng.random() < stream.error_rates[c])


# -- config -----------------------------------------------------------------------

def _resolve_game(spec) -> Game:
    if isinstance(spec, Game):
        return spec
    if isinstance(spec, dict):
        from .core import _game_from_dict
        return _game_from_dict(spec)
    try:
        return bundled_game(str(spec))
    except KeyError:
        return load_game_spec(spec)


def _theta(spec, M: int, d: int, normalization: str) -> np.ndarray:
    rows = M - 1 if normalization == "residual" else M
    if isinstance(spec, str):
        kind, _, val = spec.partition(":")
        if kind != "const":
            raise ValueError(f"unknown theta spec {spec!r}")
        return np.full((rows, d), float(val))
    return np.asarray(spec, dtype=np.float64)


def make_env(cfg: dict, rng=None):
    """Environment from a config block.

    ``{"env": "bernoulli", "game": ..., "p": [...]}`` or with
    ``"instance": "imbalanced" | "balanced"`` (drawn from ``rng``), and
    ``{"env": "linear", "game": ..., "d": 10, "theta": "const:0.1"}``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    kind = cfg.get("env", "bernoulli")
    game = _resolve_game(cfg.get("game", "apple_tasting"))
    if kind == "bernoulli":
        if "p" in cfg:
            p = cfg["p"]
        else:
            if game.n_outcomes != 2:
                raise ValueError("instance sampling needs a two-outcome game; give 'p' explicitly")
            p = sample_instance(cfg.get("instance", "imbalanced"), rng)
        return BernoulliPmEnv(game, p, rng)
    if kind == "linear":
        d = int(cfg.get("d", 10))
        norm = cfg.get("normalization", "residual")
        theta = _theta(cfg.get("theta", "const:0.1"), game.n_outcomes, d, norm)
        # the bias coordinate keeps the residual outcome linear in x
        return LinearPmEnv(game, theta, cfg.get("context", "uniform_bias"), norm, rng)
    raise ValueError(f"unknown environment kind {kind!r}")


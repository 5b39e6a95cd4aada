"""Reference policies used by the harness."""
from __future__ import annotations

import numpy as np


class FixedAction:
    """Always plays the same action (Explore-fully is ``FixedAction(0)`` on tau-detection)."""

    contextual = False

    def __init__(self, action: int, name: str | None = None):
        self.action = int(action)
        self.name = name or f"fixed[{self.action}]"

    def select(self, x=None) -> int:
        return self.action

    def update(self, action, symbol_index, x=None) -> None:
        pass


class UniformRandom:
    contextual = False

    def __init__(self, n_actions: int, rng=None, name: str = "uniform"):
        self.n_actions = int(n_actions)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.name = name

    def select(self, x=None) -> int:
        return int(self.rng.integers(self.n_actions))

    def update(self, action, symbol_index, x=None) -> None:
        pass


class Oracle:
    """Plays the environment's optimal action; needs a callable ``best(x)``."""

    contextual = False

    def __init__(self, best, name: str = "oracle"):
        self.best = best
        self.name = name

    def select(self, x=None) -> int:
        return int(self.best(x))

    def update(self, action, symbol_index, x=None) -> None:
        pass

import numpy as np
import pytest

from pmkit.core import build_game
from pmkit.structure import Observability, analyze


def random_observable_games(n, seed=0, shape=(3, 3)):
    """``n`` random games with at least two Pareto actions that are globally observable."""
    rng = np.random.default_rng(seed)
    N, M = shape
    out = []
    while len(out) < n:
        L = rng.integers(0, 4, size=(N, M)).astype(float)
        H = rng.choice(list("abc"), size=(N, M)).tolist()
        g = build_game(L, H, name=f"rand{len(out)}")
        s = analyze(g)
        if s.observability in (Observability.LOCAL, Observability.GLOBAL_ONLY):
            out.append((g, s))
    return out


@pytest.fixture(scope="session")
def random_games():
    return random_observable_games(50, seed=7)

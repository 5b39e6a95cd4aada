"""Cell decomposition and observer structure of a finite PM game."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .core import Game
from .numerics import (
    ConstraintSet,
    NoSolution,
    affine_dimension,
    in_direct_sum,
    least_norm_solve,
    lp_extremize,
    lp_feasible,
)

__all__ = [
    "GameStructure",
    "Observability",
    "ObservabilityError",
    "analyze",
    "cell_of",
    "classify_actions",
    "classify_game",
    "neighbor_pairs",
    "nplus",
    "observer_structure",
]

_INCLUSION_TOL = 1e-9


class Observability(str, enum.Enum):
    TRIVIAL = "trivial"
    LOCAL = "locally_observable"
    GLOBAL_ONLY = "globally_observable_only"
    NONE = "not_globally_observable"

    @property
    def difficulty(self) -> str:
        return {
            Observability.TRIVIAL: "trivial",
            Observability.LOCAL: "easy",
            Observability.GLOBAL_ONLY: "hard",
            Observability.NONE: "hopeless",
        }[self]


class ObservabilityError(RuntimeError):
    """Loss difference of a neighbour pair cannot be reconstructed from feedback."""


@dataclass(frozen=True, eq=False)
class GameStructure:
    game: Game
    cells: tuple[ConstraintSet, ...]
    pareto: frozenset[int]
    dominated: frozenset[int]
    degenerate: frozenset[int]
    neighbor_pairs: tuple[tuple[int, int], ...]
    nplus: dict[tuple[int, int], frozenset[int]]
    observer_sets: dict[tuple[int, int], tuple[int, ...]]
    observer_vectors: dict[tuple[int, int, int], np.ndarray]
    weights: np.ndarray
    observability: Observability

    def observer_vector(self, i, j, a) -> np.ndarray:
        return self.observer_vectors[(i, j, a)]

    def to_dict(self) -> dict:
        """JSON-ready report; action indices are 0-based."""
        g = self.game
        return {
            "game": g.name,
            "n_actions": g.n_actions,
            "n_outcomes": g.n_outcomes,
            "symbols_per_action": g.symbols_per_action.tolist(),
            "loss_normalized": g.is_normalized,
            "observability": self.observability.value,
            "difficulty": self.observability.difficulty,
            "pareto": sorted(self.pareto),
            "dominated": sorted(self.dominated),
            "degenerate": sorted(self.degenerate),
            "neighbor_pairs": [list(p) for p in self.neighbor_pairs],
            "nplus": {f"{i},{j}": sorted(s) for (i, j), s in self.nplus.items()},
            "observer_sets": {f"{i},{j}": list(v) for (i, j), v in self.observer_sets.items()},
            "observer_vectors": {
                f"{i},{j},{a}": v.tolist() for (i, j, a), v in self.observer_vectors.items()
            },
            "weights": self.weights.tolist(),
        }


def _cell_rows(game: Game, i: int):
    others = [j for j in range(game.n_actions) if j != i]
    return game.loss[i] - game.loss[others]


def cell_of(game: Game, i: int) -> ConstraintSet:
    """Region of the simplex where action ``i`` has minimal expected loss."""
    if not 0 <= i < game.n_actions:
        raise IndexError(f"action {i} out of range")
    cs = ConstraintSet.simplex(game.n_outcomes)
    rows = _cell_rows(game, i)
    return cs.with_le(rows, np.zeros(len(rows)))


def _contained(inner: ConstraintSet, game: Game, k: int) -> bool:
    """Whether the (nonempty) set ``inner`` lies inside the cell of ``k``."""
    for row in _cell_rows(game, k):
        if not np.any(row):
            continue
        top, _ = lp_extremize(row, inner, "max")
        if top > _INCLUSION_TOL:
            return False
    return True


def classify_actions(game: Game, cells=None):
    """Split actions into ``(pareto, dominated, degenerate)``."""
    if cells is None:
        cells = [cell_of(game, i) for i in range(game.n_actions)]
    nonempty = [bool(lp_feasible(c)) for c in cells]
    dominated = {i for i, ok in enumerate(nonempty) if not ok}
    degenerate = set()
    for i in range(game.n_actions):
        if i in dominated:
            continue
        for k in range(game.n_actions):
            if k == i or k in dominated:
                continue
            # C_i inside C_k, and some point of C_k outside C_i
            if _contained(cells[i], game, k) and not _contained(cells[k], game, i):
                degenerate.add(i)
                break
    pareto = set(range(game.n_actions)) - dominated - degenerate
    return frozenset(pareto), frozenset(dominated), frozenset(degenerate)


def neighbor_pairs(game: Game, pareto, cells=None) -> tuple[tuple[int, int], ...]:
    """Pareto pairs whose cells meet in an ``(M-2)``-dimensional face."""
    if cells is None:
        cells = [cell_of(game, i) for i in range(game.n_actions)]
    target = game.n_outcomes - 2
    out = []
    for i, j in itertools.combinations(sorted(pareto), 2):
        if affine_dimension(cells[i].intersect(cells[j])) == target:
            out.append((i, j))
    return tuple(out)


def nplus(game: Game, i: int, j: int, cells=None) -> frozenset[int]:
    """All actions whose cell contains the common face of ``i`` and ``j``."""
    if cells is None:
        cells = [cell_of(game, k) for k in range(game.n_actions)]
    face = cells[i].intersect(cells[j])
    if not lp_feasible(face):
        return frozenset()
    return frozenset(k for k in range(game.n_actions) if _contained(face, game, k))


def _blocks(game: Game, actions):
    return [game.signal_matrices[a] for a in actions]


def classify_game(game: Game, pareto=None, pairs=None, nplus_sets=None) -> Observability:
    if pareto is None:
        pareto, _, _ = classify_actions(game)
    if len(pareto) <= 1:
        return Observability.TRIVIAL
    if pairs is None:
        pairs = neighbor_pairs(game, pareto)
    if nplus_sets is None:
        nplus_sets = {p: nplus(game, *p) for p in pairs}
    local = all(
        in_direct_sum(game.loss[i] - game.loss[j], _blocks(game, sorted(nplus_sets[(i, j)])))
        for i, j in pairs
    )
    everyone = _blocks(game, range(game.n_actions))
    global_ = all(
        in_direct_sum(game.loss[i] - game.loss[j], everyone)
        for i, j in itertools.combinations(range(game.n_actions), 2)
    )
    if not global_:
        return Observability.NONE
    return Observability.LOCAL if local else Observability.GLOBAL_ONLY


def _solve_observers(game: Game, i: int, j: int, V):
    """Observer vectors of ``(i, j)`` over the observer set ``V``.

    Single-symbol actions only span the constant direction, which every other
    action's signal image already contains, so they are left out of the
    system (zero vector) whenever an informative action is available.
    """
    informative = [a for a in V if len(game.symbols[a]) > 1]
    solve_over = informative or list(V)
    A = np.hstack([game.signal_matrices[a].T for a in solve_over])
    x = least_norm_solve(A, game.loss[i] - game.loss[j])
    vectors = {a: np.zeros(len(game.symbols[a])) for a in V}
    start = 0
    for a in solve_over:
        s = len(game.symbols[a])
        vectors[a] = x[start:start + s]
        start += s
    return vectors


def observer_structure(game: Game, pairs, nplus_sets=None):
    """Observer sets, observer vectors and action weights for all neighbour pairs.

    Returns ``(observer_sets, observer_vectors, weights)`` keyed by ordered
    pairs ``(i, j)`` and triples ``(i, j, a)``.
    """
    if nplus_sets is None:
        nplus_sets = {p: nplus(game, *p) for p in pairs}
    sets = {}
    vectors = {}
    weights = np.zeros(game.n_actions)
    everyone = tuple(range(game.n_actions))
    for i, j in pairs:
        Np = tuple(sorted(nplus_sets[(i, j)]))
        local = in_direct_sum(game.loss[i] - game.loss[j], _blocks(game, Np))
        V = Np if local else everyone
        for a_, b_ in ((i, j), (j, i)):
            try:
                vecs = _solve_observers(game, a_, b_, V)
            except NoSolution:
                raise ObservabilityError(
                    f"loss difference of pair ({a_}, {b_}) is not observable"
                ) from None
            sets[(a_, b_)] = V
            for a, v in vecs.items():
                v.setflags(write=False)
                vectors[(a_, b_, a)] = v
                if v.size:
                    weights[a] = max(weights[a], float(np.max(np.abs(v))))
    weights.setflags(write=False)
    return sets, vectors, weights


def analyze(game: Game) -> GameStructure:
    """Full structural analysis of ``game``."""
    cells = tuple(cell_of(game, i) for i in range(game.n_actions))
    pareto, dominated, degenerate = classify_actions(game, cells)
    pairs = neighbor_pairs(game, pareto, cells)
    nplus_sets = {}
    for i, j in pairs:
        s = nplus(game, i, j, cells)
        nplus_sets[(i, j)] = s
        nplus_sets[(j, i)] = s
    observability = classify_game(game, pareto, pairs, nplus_sets)
    if observability is Observability.NONE:
        sets, vectors, weights = {}, {}, np.zeros(game.n_actions)
    else:
        sets, vectors, weights = observer_structure(game, pairs, nplus_sets)
    return GameStructure(
        game=game,
        cells=cells,
        pareto=pareto,
        dominated=dominated,
        degenerate=degenerate,
        neighbor_pairs=pairs,
        nplus=nplus_sets,
        observer_sets=sets,
        observer_vectors=vectors,
        weights=weights,
        observability=observability,
    )

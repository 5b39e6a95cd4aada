"""Finite partial-monitoring games.

A game is a pair of ``N x M`` matrices: the loss matrix and the feedback
matrix whose entries are opaque symbols.  Everything the strategies need
about feedback is derived per action: the number of distinct symbols
``sigma_i`` and the binary signal matrix ``S_i`` mapping outcomes to symbols.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Game",
    "GameSpecError",
    "SymbolObservation",
    "apple_tasting",
    "build_game",
    "bundled_game",
    "encode_feedback",
    "label_efficient",
    "load_game_spec",
    "save_game_spec",
    "tau_detection",
]

BOT, WEDGE, ODOT = "⊥", "∧", "⊙"


class GameSpecError(ValueError):
    """Raised for malformed game matrices or game spec files."""


@dataclass(frozen=True, eq=False)
class Game:
    """Immutable finite PM game.

    Use :func:`build_game` rather than the constructor; it derives the
    symbol tables and signal matrices.
    """

    name: str
    loss: np.ndarray
    feedback: tuple[tuple[str, ...], ...]
    symbols: tuple[tuple[str, ...], ...]
    signal_matrices: tuple[np.ndarray, ...]
    symbol_table: np.ndarray = field(repr=False)

    @property
    def n_actions(self) -> int:
        return self.loss.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.loss.shape[1]

    @property
    def symbols_per_action(self) -> np.ndarray:
        return np.array([len(s) for s in self.symbols], dtype=np.int64)

    @property
    def loss_range(self) -> float:
        return float(self.loss.max() - self.loss.min())

    @property
    def is_normalized(self) -> bool:
        """Whether ``max(L) - min(L) <= 1`` (tau-detection breaks this for tau < 1)."""
        return self.loss_range <= 1.0

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return (
            self.name == other.name
            and self.feedback == other.feedback
            and np.array_equal(self.loss, other.loss)
        )

    def __hash__(self):
        return hash((self.name, self.feedback, self.loss.tobytes()))


@dataclass(frozen=True)
class SymbolObservation:
    action: int
    symbol_index: int
    one_hot: np.ndarray


def build_game(loss, feedback, name: str = "custom") -> Game:
    """Validate ``loss``/``feedback`` and derive the signal matrices.

    Symbols of each row are enumerated in order of first appearance, left to
    right, so ``S_i[u, v] = 1`` iff ``feedback[i][v]`` is the ``u``-th distinct
    symbol of row ``i``.
    """
    try:
        L = np.array(loss, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise GameSpecError(f"loss matrix is not a rectangular numeric array: {exc}") from None
    if L.ndim != 2 or L.size == 0:
        raise GameSpecError("loss must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(L)):
        raise GameSpecError("loss entries must be finite")
    n, m = L.shape
    if n < 2 or m < 2:
        raise GameSpecError(f"need at least 2 actions and 2 outcomes, got {n}x{m}")

    rows = [tuple(str(s) for s in row) for row in feedback]
    if len(rows) != n or any(len(r) != m for r in rows):
        raise GameSpecError(f"feedback matrix must be {n}x{m} like the loss matrix")

    symbols = []
    table = np.zeros((n, m), dtype=np.int64)
    signals = []
    for i, row in enumerate(rows):
        order: dict[str, int] = {}
        for j, s in enumerate(row):
            table[i, j] = order.setdefault(s, len(order))
        symbols.append(tuple(order))
        S = np.zeros((len(order), m))
        S[table[i], np.arange(m)] = 1.0
        S.setflags(write=False)
        signals.append(S)

    L.setflags(write=False)
    table.setflags(write=False)
    return Game(
        name=name,
        loss=L,
        feedback=tuple(rows),
        symbols=tuple(symbols),
        signal_matrices=tuple(signals),
        symbol_table=table,
    )


def encode_feedback(game: Game, action: int, symbol: str) -> SymbolObservation:
    """One-hot encode ``symbol`` as observed after playing ``action``."""
    if not 0 <= action < game.n_actions:
        raise IndexError(f"action {action} out of range")
    try:
        idx = game.symbols[action].index(symbol)
    except ValueError:
        raise ValueError(f"symbol {symbol!r} is not observable under action {action}") from None
    one_hot = np.zeros(len(game.symbols[action]))
    one_hot[idx] = 1.0
    return SymbolObservation(action, idx, one_hot)


def observe(game: Game, action: int, outcome: int) -> SymbolObservation:
    """Observation produced by ``outcome`` under ``action``."""
    idx = int(game.symbol_table[action, outcome])
    one_hot = np.zeros(len(game.symbols[action]))
    one_hot[idx] = 1.0
    return SymbolObservation(action, idx, one_hot)


# -- bundled games ----------------------------------------------------------

def apple_tasting() -> Game:
    return build_game([[1, 0], [0, 1]], [[BOT, BOT], [WEDGE, ODOT]], name="apple_tasting")


def label_efficient() -> Game:
    # row order of the main-text presentation
    return build_game(
        [[1, 1], [0, 1], [1, 0]],
        [[BOT, ODOT], [WEDGE, WEDGE], [WEDGE, WEDGE]],
        name="label_efficient",
    )


def tau_detection(tau: float) -> Game:
    """Two-action game: action 0 verifies (sees error/no error), action 1 passes.

    Outcome 0 is "error", outcome 1 is "no error".
    """
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise GameSpecError(f"tau must lie in (0, 1), got {tau}")
    return build_game(
        [[1.0, 1.0], [1.0 / tau, 0.0]],
        [[WEDGE, ODOT], [BOT, BOT]],
        name=f"tau_detection({tau!r})",
    )


_TAU_RE = re.compile(r"^tau_detection\s*[(:]\s*([0-9.eE+-]+)\s*\)?$")


def bundled_game(name: str) -> Game:
    """Look up ``apple_tasting``, ``label_efficient`` or ``tau_detection(0.2)``."""
    key = name.strip()
    if key == "apple_tasting":
        return apple_tasting()
    if key == "label_efficient":
        return label_efficient()
    match = _TAU_RE.match(key)
    if match:
        return tau_detection(float(match.group(1)))
    raise KeyError(f"unknown bundled game {name!r}")


def _game_from_dict(spec) -> Game:
    if not isinstance(spec, dict):
        raise GameSpecError("game spec must be a JSON object")
    missing = {"loss", "feedback"} - set(spec)
    if missing:
        raise GameSpecError(f"game spec missing fields: {sorted(missing)}")
    loss, feedback = spec["loss"], spec["feedback"]
    for label, mat, kind in (("loss", loss, (int, float)), ("feedback", feedback, (str,))):
        if not isinstance(mat, list) or not mat or not all(isinstance(r, list) for r in mat):
            raise GameSpecError(f"{label} must be an array of arrays")
        if len({len(r) for r in mat}) != 1:
            raise GameSpecError(f"{label} has ragged rows")
        for row in mat:
            for v in row:
                if isinstance(v, bool) or not isinstance(v, kind):
                    raise GameSpecError(f"{label} entry {v!r} has the wrong type")
    return build_game(loss, feedback, name=str(spec.get("name", "custom")))


def load_game_spec(path) -> Game:
    """Load a game from a JSON spec file, or by bundled name."""
    if isinstance(path, str) and not Path(path).exists():
        try:
            return bundled_game(path)
        except KeyError:
            pass
    try:
        spec = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise GameSpecError(f"no game spec file or bundled game named {str(path)!r}") from None
    except json.JSONDecodeError as exc:
        raise GameSpecError(f"cannot parse {path}: {exc}") from None
    return _game_from_dict(spec)


def game_to_dict(game: Game) -> dict:
    return {
        "name": game.name,
        "loss": game.loss.tolist(),
        "feedback": [list(r) for r in game.feedback],
    }


def save_game_spec(game: Game, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2, ensure_ascii=False) + "\n")

"""Partial monitoring toolkit: game analysis, CBP-family strategies, simulation harness."""
from .core import Game, apple_tasting, build_game, bundled_game, label_efficient, load_game_spec, tau_detection
from .structure import GameStructure, Observability, analyze

__version__ = "0.1.0"

__all__ = [
    "Game",
    "GameStructure",
    "Observability",
    "analyze",
    "apple_tasting",
    "build_game",
    "bundled_game",
    "label_efficient",
    "load_game_spec",
    "tau_detection",
]

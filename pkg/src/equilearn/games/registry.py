"""Game construction from identifier strings.

Recognized identifiers:
  ``matrix:<file>``     one-shot normal-form game loaded from a payoff
                        file; ``matrix:mp``, ``matrix:rps`` and
                        ``matrix:pd`` name built-in fixtures
  ``goofspiel:<N>``     N-card Goofspiel
  ``pursuit[:<W>x<H>]`` grid pursuit on a W x H grid (default 5x5)
  ``chain:<seed>``      2-player 2-action 2-step fixture game
  ``pd2``               prisoner's dilemma repeated for 2 rounds
"""

from __future__ import annotations

from .goofspiel import GoofspielGame
from .matrix import (ChainGame, MatrixGame, RepeatedMatrixGame,
                     matching_pennies, prisoners_dilemma,
                     rock_paper_scissors)
from .pursuit import PursuitGame

_BUILTIN_MATRIX = {
    "mp": matching_pennies,
    "rps": rock_paper_scissors,
    "pd": prisoners_dilemma,
}


def game_from_id(game_id: str):
    kind, _, arg = game_id.partition(":")
    if kind == "matrix":
        if not arg:
            raise ValueError("matrix games need a payoff file: matrix:<file>")
        if arg in _BUILTIN_MATRIX:
            return _BUILTIN_MATRIX[arg]()
        return MatrixGame.from_file(arg)
    if kind == "goofspiel":
        return GoofspielGame(int(arg))
    if kind == "pursuit":
        if not arg:
            return PursuitGame()
        w, _, h = arg.partition("x")
        return PursuitGame(width=int(w), height=int(h))
    if kind == "chain":
        return ChainGame(seed=int(arg) if arg else 0)
    if kind == "pd2":
        return RepeatedMatrixGame(prisoners_dilemma().payoffs, rounds=2,
                                  name="pd2")
    raise ValueError(f"unknown game identifier: {game_id!r}")

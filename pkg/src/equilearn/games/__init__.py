from .base import (Game, GameSpec, GameState, IllegalActionError, StepResult)
from .goofspiel import GoofspielGame
from .matrix import (ChainGame, MatrixGame, RepeatedMatrixGame,
                     load_payoff_file, matching_pennies, prisoners_dilemma,
                     rock_paper_scissors)
from .pursuit import PursuitGame
from .registry import game_from_id

__all__ = [
    "Game", "GameSpec", "GameState", "StepResult", "IllegalActionError",
    "MatrixGame", "RepeatedMatrixGame", "ChainGame", "GoofspielGame",
    "PursuitGame", "game_from_id", "load_payoff_file",
    "matching_pennies", "rock_paper_scissors", "prisoners_dilemma",
]

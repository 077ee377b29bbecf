"""Deterministic-game solver for singular parabolic equations on Carnot groups."""

from .algebra import CarnotGroup, engel, euclidean, group_from_name, heisenberg
from .estimator import CarnotGameSolver
from .game import GameConfig, dpp_step, solve
from .grid import Box, ValueLayer, build_layer, sample
from .operators import InfinityLaplaceOperator, MeanCurvatureOperator, get_operator

__all__ = [
    "Box",
    "CarnotGameSolver",
    "CarnotGroup",
    "GameConfig",
    "InfinityLaplaceOperator",
    "MeanCurvatureOperator",
    "ValueLayer",
    "build_layer",
    "dpp_step",
    "engel",
    "euclidean",
    "get_operator",
    "group_from_name",
    "heisenberg",
    "sample",
    "solve",
]

__version__ = "0.1.0"

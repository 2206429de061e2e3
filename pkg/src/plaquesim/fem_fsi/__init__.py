"""Monolithic ALE fluid-structure interaction discretization and solvers."""

from .assembly import STATIONARY, TRANSIENT, Assembler
from .problem import DiscreteOperator, FsiProblem, NewtonResult, SolverSettings, State
from .space import FsiSpace

__all__ = [
    "Assembler",
    "DiscreteOperator",
    "FsiProblem",
    "FsiSpace",
    "NewtonResult",
    "SolverSettings",
    "State",
    "STATIONARY",
    "TRANSIENT",
]

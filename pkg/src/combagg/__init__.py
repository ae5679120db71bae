"""Aggregation models on the two-dimensional comb: divisible sandpile, IDLA and rotor-router."""

from .idla import IdlaRun, idla_run
from .lattice import ORIGIN, GraphKind, Region, Vertex, degree, neighbors
from .rotor import RotorRun, RotorState, rotor_aggregate
from .sandpile import SandpileResult, Schedule, sandpile
from .shape import K_SHAPE, L_SHAPE, ShapeSpec, ball_region, gamma

__version__ = "0.1.0"

__all__ = [
    "K_SHAPE",
    "L_SHAPE",
    "ORIGIN",
    "GraphKind",
    "IdlaRun",
    "Region",
    "RotorRun",
    "RotorState",
    "SandpileResult",
    "Schedule",
    "ShapeSpec",
    "Vertex",
    "ball_region",
    "degree",
    "gamma",
    "idla_run",
    "neighbors",
    "rotor_aggregate",
    "sandpile",
]

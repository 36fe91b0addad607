"""Primal-dual alternating minimization with averaged primal recovery."""

from .model import (
    BoxSet,
    PrimalPoint,
    ProblemSpec,
    QuadraticObjective,
    SmoothingSetup,
    feasibility_gap,
    make_smoothing,
    objective,
    prox_diameter,
    reformulate_qp,
    spectral_norm,
    validate,
)
from .solver import AMASolver, IterationRecord, SolverConfig, SolverState, run

__version__ = "0.1.0"

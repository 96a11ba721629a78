"""Backward Euler / P1 Galerkin solver for d/dt b(u) - div(a(x, grad u) + K(u)) = f
under Musielak-Orlicz growth, with sampled assumption checks and estimate audits."""

from .errors import MusielakParabolicError, NonconvergenceError, StructureViolationError
from .fem import FemFunction, FemSpace, assemble_jacobian, assemble_residual, build_mesh, restrict
from .problem import ProblemSpec, problem_from_config
from .stepper import SolverOptions, TimeGrid, run, solve_step

__version__ = "0.1.0"

__all__ = [
    "FemFunction",
    "FemSpace",
    "MusielakParabolicError",
    "NonconvergenceError",
    "ProblemSpec",
    "SolverOptions",
    "StructureViolationError",
    "TimeGrid",
    "assemble_jacobian",
    "assemble_residual",
    "build_mesh",
    "problem_from_config",
    "restrict",
    "run",
    "solve_step",
]

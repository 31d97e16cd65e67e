"""Finite-difference solvers for Dirichlet and blow-up problems."""

from .blowup import AsymptoticBC, Schedule, constant_majorant, make_grid, solve_blowup, solve_mixed
from .discrete import Discretization, assemble_residual, monotone_iteration, solve_dirichlet
from .field import DiscreteField, write_field, write_schedule_log
from .geometry import Geometry, Grid
from .problem import BlowUp, Dirichlet, ProblemSpec

__all__ = [
    "AsymptoticBC",
    "BlowUp",
    "Dirichlet",
    "DiscreteField",
    "Discretization",
    "Geometry",
    "Grid",
    "ProblemSpec",
    "Schedule",
    "assemble_residual",
    "constant_majorant",
    "make_grid",
    "monotone_iteration",
    "solve_blowup",
    "solve_dirichlet",
    "solve_mixed",
    "write_field",
    "write_schedule_log",
]

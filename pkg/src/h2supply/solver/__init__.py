"""Embedded LP/MIP engine plus MPS interchange with external solvers."""

from .bnb import NODE_LIMIT, MipOptions, MipSolution, solve_mip
from .lp import LpArrays, LpSolution, solve_lp, solve_lp_arrays
from .mps import MpsFormatError, read_mps, read_solution, write_mps, write_solution
from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, SimplexOptions

__all__ = [
    "INFEASIBLE", "ITERATION_LIMIT", "NODE_LIMIT", "OPTIMAL", "UNBOUNDED",
    "LpArrays", "LpSolution", "MipOptions", "MipSolution", "MpsFormatError", "SimplexOptions",
    "read_mps", "read_solution", "solve_lp", "solve_lp_arrays", "solve_mip", "write_mps", "write_solution",
]

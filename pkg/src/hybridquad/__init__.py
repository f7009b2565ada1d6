"""Assumed-stress hybrid quadrilateral elements for plane elasticity."""
from .analysis import ErrorReport, EstimatorBreakdown, ExactSolution, error_norms, estimator
from .bench import BenchmarkCase, exact_solution, reproduce_table, run_case
from .elements import PLANE_STRAIN, PLANE_STRESS, Material
from .kernels import BACKEND
from .mesh import QuadMesh, generate_irregular, generate_regular, refine_uniform
from .solver import ProblemSpec, Solution, solve_problem

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BenchmarkCase",
    "ErrorReport",
    "EstimatorBreakdown",
    "ExactSolution",
    "Material",
    "PLANE_STRAIN",
    "PLANE_STRESS",
    "ProblemSpec",
    "QuadMesh",
    "Solution",
    "error_norms",
    "estimator",
    "exact_solution",
    "generate_irregular",
    "generate_regular",
    "refine_uniform",
    "reproduce_table",
    "run_case",
    "solve_problem",
]

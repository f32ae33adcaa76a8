"""Topology optimization with a bilevel knapsack and hard 0/1 designs."""
from .fem import LoadCase, MaterialModel, SolverError, StructuralError
from .knapsack import select_top_k, volume_budget
from .mesh import Grid, build_grid
from .optimizer import ConfigError, RunConfig, RunResult, apply_symmetry, checkerboard_score, run

__all__ = [
    "Grid",
    "build_grid",
    "LoadCase",
    "MaterialModel",
    "SolverError",
    "StructuralError",
    "select_top_k",
    "volume_budget",
    "ConfigError",
    "RunConfig",
    "RunResult",
    "run",
    "apply_symmetry",
    "checkerboard_score",
]

__version__ = "0.1.0"

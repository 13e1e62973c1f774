from .base import InfeasibleError, PathSolution, SolverBudget, Tour, cycle_to_path
from .brute import brute_force_gtsp, brute_force_tsp
from .gtsp import cluster_optimize, solve_gtsp
from .tsp import solve_tsp

__all__ = [
    "InfeasibleError",
    "PathSolution",
    "SolverBudget",
    "Tour",
    "cycle_to_path",
    "brute_force_gtsp",
    "brute_force_tsp",
    "cluster_optimize",
    "solve_gtsp",
    "solve_tsp",
]

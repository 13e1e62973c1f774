"""Surface-coverage path planning for redundant manipulators."""

from .kinematics import KinematicChain, ToleranceSpec, bundled_chain, load_chain
from .planners import METHODS, PlannerParams, PlanningError, Trajectory, plan, validate_trajectory
from .solvers import SolverBudget
from .surface import SurfaceMesh, compute_targets, generate_benchmark_surface, load_mesh_file

__version__ = "0.1.0"

__all__ = [
    "KinematicChain",
    "METHODS",
    "PlannerParams",
    "PlanningError",
    "SolverBudget",
    "SurfaceMesh",
    "ToleranceSpec",
    "Trajectory",
    "bundled_chain",
    "compute_targets",
    "generate_benchmark_surface",
    "load_chain",
    "load_mesh_file",
    "plan",
    "validate_trajectory",
]

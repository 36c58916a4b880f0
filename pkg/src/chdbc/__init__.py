"""Structure-preserving finite elements for Cahn-Hilliard with dynamic boundary conditions.

The bulk field ``u`` on a polygonal domain and its trace ``v`` on the
boundary evolve by coupled Cahn-Hilliard equations.  The chemical
potentials are linked through a Robin law with relaxation parameter
``L > 0``, or locked together (``μ|_Γ = βθ``) when ``L = 0``.
"""
from .assembly import FemOperators, assemble, weighted_mass
from .dynlab import (
    interpolation_scan,
    limit_study,
    omega_limit,
    semidistance,
    smoothing_probe,
)
from .elliptic import build_sl, dual_norm, energy, interpolation_ratio, solve_sl
from .mesh import (
    BulkSurfaceMesh,
    MeshError,
    generate_disk,
    generate_rectangle,
    generate_square,
    load_mesh,
    save_mesh,
)
from .potentials import PotentialPair, double_well, polynomial_potential, quadratic_well
from .stationary import multi_start, solve_stationary, stationarity_residual
from .stepper import ModelParams, NewtonError, NewtonSettings, make_system, run, step, velocity_dual_norm

__version__ = "0.1.0"

__all__ = [
    "BulkSurfaceMesh",
    "FemOperators",
    "MeshError",
    "ModelParams",
    "NewtonError",
    "NewtonSettings",
    "PotentialPair",
    "assemble",
    "build_sl",
    "double_well",
    "dual_norm",
    "energy",
    "generate_disk",
    "generate_rectangle",
    "generate_square",
    "interpolation_ratio",
    "interpolation_scan",
    "limit_study",
    "load_mesh",
    "make_system",
    "multi_start",
    "omega_limit",
    "polynomial_potential",
    "quadratic_well",
    "run",
    "save_mesh",
    "semidistance",
    "smoothing_probe",
    "solve_sl",
    "solve_stationary",
    "stationarity_residual",
    "step",
    "velocity_dual_norm",
    "weighted_mass",
]

"""Fictitious-domain mixed FEM for two-phase Stokes/Navier-Stokes flow.

A fixed structured triangular mesh carries fictitious velocity/pressure
spaces on both sides of an immersed circle/ellipse interface; interface
conditions (velocity equality, normal-stress jump) enter through Lagrange
multipliers with an augmented-Lagrangian stabilization.
"""

from .mesh import CartesianMesh, build_mesh, locate_point
from .levelset import LevelSetGeometry, ElementClassification, classify
from .cutcells import CutDecomposition, QuadratureRule, decompose, volume_rule, interface_rule
from .spaces import ScalarSpace, FictitiousDofMap, TraceSpace, build_scalar_space, build_fictitious, build_trace_space
from .assembly import PhysicalParams, StabilizationParams, BlockSaddleSystem, DiscreteSetup, build_setup, assemble_system, assemble_rhs, update_system
from .solver import FieldSolution, solve
from .manufactured import (ExactSolutionSpec, ErrorReport, solve_manufactured,
                           compute_errors, convergence_study, sweep_gamma,
                           sweep_center)
from .unsteady import (BlowUpError, NewtonError, EllipseState, TimeGrid,
                       EvolutionRecord, advance_ellipse, phi_moments,
                       surface_force, steklov_solve, navier_stokes_step,
                       transfer_velocity, stokes_evolution, nse_evolution,
                       static_bubble)

__all__ = [
    "CartesianMesh", "build_mesh", "locate_point",
    "LevelSetGeometry", "ElementClassification", "classify",
    "CutDecomposition", "QuadratureRule", "decompose", "volume_rule", "interface_rule",
    "ScalarSpace", "FictitiousDofMap", "TraceSpace",
    "build_scalar_space", "build_fictitious", "build_trace_space",
    "PhysicalParams", "StabilizationParams", "BlockSaddleSystem", "DiscreteSetup",
    "build_setup", "assemble_system", "assemble_rhs", "update_system",
    "FieldSolution", "solve",
    "ExactSolutionSpec", "ErrorReport", "solve_manufactured", "compute_errors",
    "convergence_study", "sweep_gamma", "sweep_center",
    "BlowUpError", "NewtonError", "EllipseState", "TimeGrid",
    "EvolutionRecord", "advance_ellipse", "phi_moments", "surface_force",
    "steklov_solve", "navier_stokes_step", "transfer_velocity",
    "stokes_evolution", "nse_evolution", "static_bubble",
]

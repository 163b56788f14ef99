"""Numerical prescribed-curvature radial graphs over domains of the unit sphere.

A radial graph X = rho(x) x over a geodesic ball or annulus of S^n is solved
for f(kappa) = psi(X) with Dirichlet data, by a two-stage continuity method
started from a strict subsolution. Fields are stored in v = -log rho.
"""
from .chart import DomainSpec, Grid, build_domain, covariant_gradient, covariant_hessian
from .continuation import (
    ContinuationReport,
    HomotopyProblem,
    SubsolutionData,
    choose_epsilon,
    make_cap_subsolution,
    run_stage,
    solve,
    subsolution_from_field,
)
from .curvature import CurvatureFunction, probe_structure_conditions
from .diagnostics import BoundReport, certify_solution, check_beta_identity, oracle_principal_curvatures
from .geometry import snapshot
from .solver import DirichletProblem, NewtonSettings, linearize, newton_solve, residual
from .targets import Psi

__all__ = [
    "BoundReport", "ContinuationReport", "CurvatureFunction", "DirichletProblem", "DomainSpec",
    "Grid", "HomotopyProblem", "NewtonSettings", "Psi", "SubsolutionData", "build_domain",
    "certify_solution", "check_beta_identity", "choose_epsilon", "covariant_gradient",
    "covariant_hessian", "linearize", "make_cap_subsolution", "newton_solve",
    "oracle_principal_curvatures", "probe_structure_conditions", "residual", "run_stage",
    "snapshot", "solve", "subsolution_from_field",
]

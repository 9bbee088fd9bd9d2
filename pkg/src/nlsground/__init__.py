"""Normalized ground states of radial nonlinear Schrodinger equations.

Minimizes J(u) = int |grad u|^2/2 + F(u) over the L2 sphere ||u|| = rho in
radial R^N, checks the solution identities, and evolves the resulting
standing waves in time.
"""
from .dynamics import (EvolutionAborted, EvolutionConfig, StabilityResult, energy_of, evolve,
                       mass_of, orbit_distance, stability_experiment)
from .functionals import (IdentityDiagnostics, ar_lambda, derrick_value, diagnostics, energy_J,
                          gn_quotient, j_gradient, lagrange_multiplier, pde_residual,
                          pohozaev_residual)
from .grid import RadialField, ComplexField, RadialGrid, build_grid
from .minimizer import (FlowConfig, GroundState, RhoScan, Verdict, make_plateau,
                        make_scaled_plateau, minimize_on_sphere, rearrange_decreasing, scan_rho)
from .potentials import (Family, HypothesisReport, PotentialSpec, check_hypotheses, evaluate,
                         plateau_threshold)

__version__ = "0.1.0"

__all__ = [
    "ComplexField", "EvolutionAborted", "EvolutionConfig", "Family", "FlowConfig", "GroundState",
    "HypothesisReport", "IdentityDiagnostics", "PotentialSpec", "RadialField", "RadialGrid",
    "RhoScan", "StabilityResult", "Verdict", "ar_lambda", "build_grid", "check_hypotheses",
    "derrick_value", "diagnostics", "energy_J", "energy_of", "evaluate", "evolve", "gn_quotient",
    "j_gradient", "lagrange_multiplier", "make_plateau", "make_scaled_plateau", "mass_of",
    "minimize_on_sphere", "orbit_distance", "pde_residual", "plateau_threshold",
    "pohozaev_residual", "rearrange_decreasing", "scan_rho", "stability_experiment",
]

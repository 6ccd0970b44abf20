"""Spacetime-harmonic solver and the mass-inequality bookkeeping.

Submodules: ``fields`` (grid coefficients, sampled fields, spacetime
Hessian), ``solver`` (Picard + line-relaxation solve of
Delta u + K |grad u| = 0), ``massbound`` (both sides of the mass
inequality with corner terms), ``identities`` (the bulk integral identity
and the boundary identity, checked term by term).
"""

from .fields import (AxisymField, GridCoefficients, SpacetimeHessianField,
                     build_coefficients, build_solver_grid, spacetime_hessian)
from .solver import SolveOptions, solve_spacetime_harmonic
from .massbound import MassBoundReport, mass_bound_report, mass_bound_sweep
from .identities import (BoundaryFormulaReport, IntegralFormulaReport,
                     boundary_formula_check, integral_formula_check)

__all__ = [
    "AxisymField", "GridCoefficients", "SpacetimeHessianField",
    "build_coefficients", "build_solver_grid", "spacetime_hessian",
    "SolveOptions", "solve_spacetime_harmonic",
    "MassBoundReport", "mass_bound_report", "mass_bound_sweep",
    "BoundaryFormulaReport", "IntegralFormulaReport",
    "boundary_formula_check", "integral_formula_check",
]

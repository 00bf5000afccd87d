"""Eigenvalue solver for coupled variable-exponent (p(x), q(x))-Laplacian systems."""

from ._kernels import BACKEND
from .checks import Check
from .diagnostics import (
    DiagnosticsReport, MoserLadder, check_boundedness, check_estimk, check_lemma_L6, check_positivity,
    full_report, moser_ladder,
)
from .energy import (
    EnergyGradient, QuotientUndefinedError, StatePair, energy_A, energy_B, energy_B_weighted, grad_A, grad_B,
    rayleigh_scalar, rayleigh_system,
)
from .grid import CellField, Domain, Grid, GridFunction, VectorField, gradient, integrate, laplacian
from .modular import luxemburg_norm, modular
from .problem import (
    ExponentField, ExponentSpec, build_exponent_field, check_monotonicity_condition, validate_hypotheses,
)
from .solver import (
    ScalarResult, SolveOptions, SolveResult, SweepResult, minimize_on_XR, minimize_scalar,
    retract_to_constraint, scalar_lower_bound_chain, sweep_R,
)

__version__ = "0.1.0"

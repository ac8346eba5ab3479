"""Birkhoff regularity, characteristic matrices and Green's functions for two-point problems.

Operators are ``l(y) = D^n y + sum_{k<=n-2} p_k(x) D^k y`` on [0, 1] with ``D = -i d/dx``
and ``n`` linearly independent two-point boundary conditions.
"""
__version__ = "0.1.0"

from .model import (
    BoundaryConditionSet,
    Coefficient,
    DegenerateConditionsError,
    DifferentialExpression,
    ProblemError,
    RawCondition,
    essential_part,
    normalize_conditions,
    parse_problem,
    problem_document,
    validate,
)
from .regularity import classify, fourier_factor_residual, strong_regularity_polynomial, theta
from .spectral import FundamentalSystem, decay_profile, gram_condition, point_on_ray, spectral_point
from .green import (
    GreenFunction,
    NearEigenvalueError,
    char_matrix,
    char_matrix_limit,
    delta_matrix,
    green_eval,
    resolvent_norm_estimate,
)
from .direct import solve_bvp_direct
from .roots import eigenvalues_in
from .dissipativity import (
    dissipativity_test,
    lagrange_form,
    sample_dissipative_bc,
    sample_selfadjoint_bc,
)

__all__ = [
    "BoundaryConditionSet", "Coefficient", "DegenerateConditionsError", "DifferentialExpression",
    "ProblemError", "RawCondition", "essential_part", "normalize_conditions", "parse_problem",
    "problem_document", "validate", "classify", "fourier_factor_residual",
    "strong_regularity_polynomial", "theta", "FundamentalSystem", "decay_profile", "gram_condition",
    "point_on_ray", "spectral_point", "GreenFunction", "NearEigenvalueError", "char_matrix",
    "char_matrix_limit", "delta_matrix", "green_eval", "resolvent_norm_estimate", "solve_bvp_direct",
    "eigenvalues_in", "dissipativity_test", "lagrange_form", "sample_dissipative_bc",
    "sample_selfadjoint_bc",
]

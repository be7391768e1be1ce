"""Pathwise approximation of scalar SDEs at ``t = 1`` with adaptive observation of ``W``."""

__version__ = "0.1.0"

from .brownian import (
    BrownianPath,
    IncrementWithArea,
    bridge_integral_variance,
    make_rng,
    sample_increment_with_area,
    sample_increments_with_area,
)
from .constants import (
    ConstantSet,
    analytic_constants,
    gaussian_abs_moment,
    mc_constants,
    weight_rms,
    weighted_integration_constant,
)
from .exceptions import ConfigError, DomainError, NumericError
from .harness import (
    ErrorEstimate,
    Study,
    StudyRow,
    compare_schemes,
    convergence_study,
    cost_error_ratio,
    estimate_error,
    fine_reference,
)
from .problem import (
    AdditiveProblem,
    AutonomousProblem,
    CoefficientSet,
    LinearProblem,
    exact_terminal_additive,
    exact_terminal_linear,
    g_weight,
    load_problem,
)
from .quadrature import Polynomial
from .schemes import (
    BudgetRule,
    KRule,
    SchemeResult,
    WeightEstimate,
    adaptive_scheme,
    budgets,
    default_k_rule,
    equidistant_grid,
    estimate_weights,
    euler,
    milstein,
    scheme_equi,
    scheme_fixed,
    scheme_star,
    scheme_star_star,
    wagner_platen_full,
    wagner_platen_truncated,
)

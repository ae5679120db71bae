"""Discrete potential theory on comb regions."""

from .closed_form import (
    b_coefficient,
    ball_eps_region,
    closed_form_discrepancy,
    f_field,
    g_closed_form,
    g_field,
    g_tooth,
    lambda_closed_form,
    lambda_ratio,
    min_ratio_on_inner_boundary,
)
from .dirichlet import (
    DEFAULT_TOL,
    SolverError,
    dirichlet_solve,
    laplacian_matrix,
    solve_laplace_system,
)
from .green import (
    green_matrix,
    interval_green,
    interval_region,
    stopped_green,
    weight_function,
)
from .kernel import (
    A_gf,
    KernelPoint,
    green_gf,
    green_series_coefficients,
    kernel_eval,
    return_prob_dp,
)

__all__ = [
    "DEFAULT_TOL",
    "A_gf",
    "KernelPoint",
    "SolverError",
    "b_coefficient",
    "ball_eps_region",
    "closed_form_discrepancy",
    "dirichlet_solve",
    "f_field",
    "g_closed_form",
    "g_field",
    "g_tooth",
    "green_gf",
    "green_matrix",
    "green_series_coefficients",
    "interval_green",
    "interval_region",
    "kernel_eval",
    "lambda_closed_form",
    "lambda_ratio",
    "laplacian_matrix",
    "min_ratio_on_inner_boundary",
    "return_prob_dp",
    "solve_laplace_system",
    "stopped_green",
    "weight_function",
]

"""Numerical checks of the perturbation, spectral and gradient results."""

from .checks import (CHECKS, bauer_fike, corollary_comparison, eigvals, excess_risk,
                     expressivity_gap, finite_difference_jacobian, invariant_lift_phase_check,
                     jacobian_fd_error, linear_ridge_gap, one_step_gradient,
                     operator_perturbation, perturbation_bound_sweep, persistent_transient,
                     phase_mean, ridge_shrinkage, similarity_gap, ska_norm_bound,
                     ska_sigma_min_bound, softmax_jacobian, softmax_s_bound, spectrum_distance)
from .report import BoundReport, power_table, round3
from .suite import PUBLISHED_POWER_TABLE, check_power_table, run_suite, spectrum_summary

__all__ = [
    "CHECKS", "PUBLISHED_POWER_TABLE", "BoundReport", "bauer_fike", "check_power_table",
    "corollary_comparison", "eigvals", "excess_risk", "expressivity_gap",
    "finite_difference_jacobian", "invariant_lift_phase_check", "jacobian_fd_error",
    "linear_ridge_gap", "one_step_gradient", "operator_perturbation",
    "perturbation_bound_sweep", "persistent_transient", "phase_mean", "power_table",
    "ridge_shrinkage", "round3", "run_suite", "similarity_gap", "ska_norm_bound",
    "ska_sigma_min_bound", "softmax_jacobian", "softmax_s_bound", "spectrum_distance",
    "spectrum_summary",
]

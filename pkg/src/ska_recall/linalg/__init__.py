"""Dense FP64 kernels: Cholesky, triangular solves, power iteration and the
double-double outer-product accumulators used by the statistics layer."""

from ._backend import BACKEND, ENV_FLAG, NUMBA_AVAILABLE, implementations, kernels
from .dense import (CholeskyFactor, cholesky, cholesky_raw, power_iteration,
                    solve_lower, solve_upper, start_vector)

__all__ = [
    "BACKEND", "ENV_FLAG", "NUMBA_AVAILABLE", "CholeskyFactor", "cholesky",
    "cholesky_raw", "implementations", "kernels", "power_iteration",
    "solve_lower", "solve_upper", "start_vector",
]

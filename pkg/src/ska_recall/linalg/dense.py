from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (DimensionMismatch, NonSquare, NonSymmetric,
                      NotPositiveDefinite, SingularDiagonal)
from ._backend import kernels

SYM_TOL = 1e-12
SINGULAR_TOL = 1e-300


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower factor ``l`` of ``a + jitter_used * I``."""

    l: np.ndarray
    jitter_used: float

    @property
    def jitter_applied(self) -> bool:
        return self.jitter_used > 0.0


def _as_matrix(a, name="a"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _check_square(a, name="a"):
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"{name} is {a.shape[0]}x{a.shape[1]}")


def cholesky_raw(a, jitter):
    """Factor without validation. Exactly one jittered retry."""
    l, ok = kernels.cholesky(a)
    if ok:
        return l, 0.0
    l, ok = kernels.cholesky(a + jitter * np.eye(a.shape[0], dtype=a.dtype))
    if ok:
        return l, float(jitter)
    raise NotPositiveDefinite(
        f"Cholesky failed on a {a.shape[0]}x{a.shape[0]} matrix even with jitter {jitter:g}")


def cholesky(a, jitter: float = 1e-4) -> CholeskyFactor:
    """Cholesky factor of a symmetric positive-definite matrix.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Symmetric matrix. Symmetry is checked to ``1e-12`` relative to the
        largest entry.
    jitter : float
        Diagonal shift used for the single retry when the first attempt hits
        a non-positive pivot.

    Returns
    -------
    CholeskyFactor
        ``l @ l.T == a + jitter_used * I``.
    """
    a = _as_matrix(a)
    _check_square(a)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYM_TOL * scale:
        raise NonSymmetric("matrix is not symmetric")
    l, used = cholesky_raw(a, jitter)
    return CholeskyFactor(l, used)


def _check_triangular(t, b, lower):
    t = _as_matrix(t, "l" if lower else "u")
    _check_square(t, "triangular factor")
    b = np.asarray(b, dtype=np.float64)
    if b.ndim not in (1, 2) or b.shape[0] != t.shape[0]:
        raise DimensionMismatch(f"rhs shape {b.shape} incompatible with {t.shape}")
    off = np.triu(t, 1) if lower else np.tril(t, -1)
    if np.any(off != 0.0):
        raise ValueError("factor is not triangular")
    if np.any(np.abs(np.diag(t)) < SINGULAR_TOL):
        raise SingularDiagonal("triangular factor has a zero diagonal entry")
    return t, b


def solve_lower(l, b):
    """Forward substitution for ``l x = b``."""
    l, b = _check_triangular(l, b, lower=True)
    return kernels.solve_lower(l, b)


def solve_upper(u, b):
    """Back substitution for ``u x = b``."""
    u, b = _check_triangular(u, b, lower=False)
    return kernels.solve_upper(u, b)


def start_vector(n, seed):
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def power_iteration(a, iters: int = 6, seed: int = 0) -> float:
    """Estimate the largest singular value of ``a``.

    Iterates ``v <- normalize(a.T @ (a @ v))`` from a seeded unit start vector
    and returns ``||a v||``. The estimate never exceeds the true value.
    """
    a = _as_matrix(a)
    if iters < 0:
        raise ValueError("iters must be >= 0")
    if a.size == 0 or not np.any(a):
        return 0.0
    return kernels.power_sigma(a, start_vector(a.shape[1], seed), int(iters))

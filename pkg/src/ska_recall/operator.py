"""Whitened Koopman operator estimation and the retrieval maps built on it."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .config import SkaConfig
from .errors import DimensionMismatch, NotPositiveDefinite
from .linalg import cholesky_raw, kernels, start_vector
from .stats import SufficientStats


@dataclass(frozen=True)
class KoopmanOperator:
    """``l`` factors ``G + eps I`` (plus any jitter); ``a_hat`` is the
    normalized whitened transition; ``c_v`` is the value cross-moment.

    The ridge readout ``b_v = C_v (L L^T)^{-1}`` is formed on first access.
    Retrieval never needs it: B_v L = C_v L^{-T}.
    """

    l: np.ndarray
    a_hat: np.ndarray
    c_v: np.ndarray
    sigma_max: float
    jitter_used: float
    cfg: SkaConfig

    @cached_property
    def b_v(self) -> np.ndarray:
        x = kernels.solve_lower(self.l, np.ascontiguousarray(self.c_v.T))
        x = kernels.solve_upper(np.ascontiguousarray(self.l.T), x)
        return np.ascontiguousarray(x.T)

    @property
    def rank(self):
        return self.l.shape[0]

    @property
    def head_dim(self):
        return self.c_v.shape[0]


def _check_stats(stats, cfg):
    r, p = stats.g.shape[0], stats.c_v.shape[0]
    if stats.g.shape != (r, r) or stats.m.shape != (r, r) or stats.c_v.shape != (p, r):
        raise DimensionMismatch("inconsistent statistic shapes")
    if r != cfg.rank_r or p != cfg.head_dim_p:
        raise DimensionMismatch(f"stats are r={r}, P={p} but config says r={cfg.rank_r}, P={cfg.head_dim_p}")


def regularized_gram(stats: SufficientStats, cfg: SkaConfig) -> np.ndarray:
    return stats.g + cfg.ridge_eps * np.eye(stats.g.shape[0], dtype=stats.g.dtype)


def whitened_transition(l, m):
    """A_w = L^{-1} M L^{-T} via two forward solves and a transpose."""
    y = kernels.solve_lower(l, m)
    z = kernels.solve_lower(l, np.ascontiguousarray(y.T))
    return np.ascontiguousarray(z.T)


@lru_cache(maxsize=64)
def _start(r, seed, dtype):
    v = start_vector(r, seed).astype(dtype)
    v.setflags(write=False)
    return v


def estimate(stats: SufficientStats, cfg: SkaConfig) -> KoopmanOperator:
    """Estimate (L, A_hat, B_v) from sufficient statistics.

    L L^T = G + eps I (one jittered retry on failure), A_w = L^{-1} M L^{-T},
    A_hat = gamma A_w / max(sigma_max(A_w), 1) with sigma_max from power
    iteration, and B_v = C_v (G + eps I)^{-1} (formed lazily).

    Empty statistics give the trivial operator L = sqrt(eps) I, A_hat = 0,
    B_v = 0, so every retrieval returns the zero vector.
    """
    _check_stats(stats, cfg)
    r = stats.g.shape[0]
    dt = stats.g.dtype
    l, a_hat, sigma, jit, ok = kernels.estimate_fused(
        np.ascontiguousarray(stats.g), np.ascontiguousarray(stats.m), cfg.ridge_eps,
        cfg.jitter, _start(r, cfg.power_seed, dt), cfg.power_iters, cfg.gamma)
    if not ok:
        raise NotPositiveDefinite(
            f"G + eps I is not positive definite even with jitter {cfg.jitter:g}")
    return KoopmanOperator(l, a_hat.astype(dt, copy=False), np.array(stats.c_v, order="C"),
                           float(sigma), float(jit), cfg)


def retrieve_ska(op: KoopmanOperator, q, k=None, eta=None) -> np.ndarray:
    """y = eta B_v L A_hat^K L^{-1} q (K repeated matrix-vector products).

    Evaluated as eta C_v L^{-T} A_hat^K L^{-1} q, which is the same map.
    """
    k = op.cfg.power_k if k is None else k
    eta = op.cfg.eta if eta is None else eta
    q = np.asarray(q, dtype=op.l.dtype)
    if q.shape[0] != op.rank:
        raise DimensionMismatch(f"query has length {q.shape[0]}, expected {op.rank}")
    return kernels.retrieve_fused(op.l, op.a_hat, op.c_v, np.ascontiguousarray(q), int(k), float(eta))


def retrieve_linear(stats: SufficientStats, q) -> np.ndarray:
    """Unregularized linear-attention readout C_v q."""
    return stats.c_v @ np.asarray(q, dtype=np.float64)


def retrieve_ridge(stats: SufficientStats, cfg: SkaConfig, q) -> np.ndarray:
    """C_v (G + eps I)^{-1} q."""
    l, _ = cholesky_raw(regularized_gram(stats, cfg), cfg.jitter)
    x = kernels.solve_lower(l, np.asarray(q, dtype=np.float64))
    x = kernels.solve_upper(np.ascontiguousarray(l.T), x)
    return stats.c_v @ x


def propagator(op: KoopmanOperator, k=None) -> np.ndarray:
    """Phi_K = L A_hat^K L^{-1}."""
    k = op.cfg.power_k if k is None else k
    ak = np.linalg.matrix_power(op.a_hat, k)
    y = op.l @ ak
    # y L^{-1} = (L^{-T} y^T)^T
    return np.ascontiguousarray(kernels.solve_upper(np.ascontiguousarray(op.l.T),
                                                    np.ascontiguousarray(y.T)).T)


def ska_jacobian(op: KoopmanOperator, k=None, eta=None) -> np.ndarray:
    """d y / d q = eta B_v L A_hat^K L^{-1}."""
    eta = op.cfg.eta if eta is None else eta
    return eta * (op.b_v @ propagator(op, k))

"""Koopman MLP branch: lift, a bank of damped 2x2 rotations, linear readout."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_prime(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


def _silu_lipschitz():
    grid = np.linspace(-10.0, 10.0, 200001)  # step 1e-4
    return float(np.max(np.abs(silu_prime(grid))))


C_SILU = _silu_lipschitz()


def koopman_width(d: int) -> int:
    """Bank width d_k = ceil(d * 8/3 / 64) * 64."""
    return int(math.ceil(d * 8 / 3 / 64) * 64)


def clamp_pairs(gammas, omegas):
    """Scale each (gamma, omega) pair so its modulus rho stays <= 1."""
    g = np.asarray(gammas, dtype=np.float64)
    w = np.asarray(omegas, dtype=np.float64)
    rho = np.hypot(g, w)
    s = np.minimum(1.0, 1.0 / np.maximum(rho, 1e-300))
    return g * s, w * s


@dataclass
class KoopmanMLP:
    w_lift: np.ndarray      # (d_k, d)
    gammas: np.ndarray      # (d_k/2,)
    omegas: np.ndarray      # (d_k/2,)
    w_read: np.ndarray      # (d, d_k)
    w_gate: np.ndarray | None = None

    def __post_init__(self):
        dk, d = self.w_lift.shape
        if dk % 2:
            raise DimensionMismatch("bank width must be even")
        if self.w_read.shape != (d, dk):
            raise DimensionMismatch("readout must be (d, d_k)")
        if self.gammas.shape != (dk // 2,) or self.omegas.shape != (dk // 2,):
            raise DimensionMismatch("one (gamma, omega) per pair is required")
        self.gammas, self.omegas = clamp_pairs(self.gammas, self.omegas)

    @classmethod
    def init(cls, d, seed=0, gated=False, width=None):
        """Fixed-seed uniform init scaled by 1/sqrt(fan_in)."""
        rng = np.random.default_rng(seed)
        dk = koopman_width(d) if width is None else width
        w_lift = rng.uniform(-1, 1, (dk, d)) / math.sqrt(d)
        w_read = rng.uniform(-1, 1, (d, dk)) / math.sqrt(dk)
        rho = rng.uniform(0.5, 1.0, dk // 2)
        theta = rng.uniform(-math.pi, math.pi, dk // 2)
        w_gate = rng.uniform(-1, 1, (dk, d)) / math.sqrt(d) if gated else None
        return cls(w_lift, rho * np.cos(theta), rho * np.sin(theta), w_read, w_gate)

    @property
    def d(self):
        return self.w_lift.shape[1]

    @property
    def width(self):
        return self.w_lift.shape[0]

    @property
    def gated(self):
        return self.w_gate is not None

    def param_count(self):
        n = self.w_lift.size + self.w_read.size
        return n + (self.w_gate.size if self.gated else 0)

    def rotation(self) -> np.ndarray:
        """Block-diagonal R with blocks [[gamma, omega], [-omega, gamma]]."""
        dk = self.width
        r = np.zeros((dk, dk))
        i = np.arange(0, dk, 2)
        r[i, i] = self.gammas
        r[i, i + 1] = self.omegas
        r[i + 1, i] = -self.omegas
        r[i + 1, i + 1] = self.gammas
        return r

    def _rotate(self, g):
        g1, g2 = g[0::2], g[1::2]
        z = np.empty_like(g)
        z[0::2] = self.gammas * g1 + self.omegas * g2
        z[1::2] = -self.omegas * g1 + self.gammas * g2
        return z

    def branch(self, h):
        h = np.asarray(h, dtype=np.float64)
        z = self._rotate(silu(self.w_lift @ h))
        if self.gated:
            z = z / (1.0 + np.exp(-(self.w_gate @ h)))
        return self.w_read @ z

    def forward(self, h):
        """Residual output h + W_read R SiLU(W_lift h) (gated if enabled)."""
        return np.asarray(h, dtype=np.float64) + self.branch(h)

    def branch_jacobian(self, h):
        """Jacobian of the branch; ungated: W_read R Diag(SiLU'(a)) W_lift."""
        h = np.asarray(h, dtype=np.float64)
        a = self.w_lift @ h
        rd = self.rotation() * silu_prime(a)[None, :]
        if not self.gated:
            return self.w_read @ rd @ self.w_lift
        s = 1.0 / (1.0 + np.exp(-(self.w_gate @ h)))
        u = self._rotate(silu(a))
        inner = s[:, None] * (rd @ self.w_lift) + (u * s * (1.0 - s))[:, None] * self.w_gate
        return self.w_read @ inner

    def jacobian(self, h):
        return np.eye(self.d) + self.branch_jacobian(h)

    def jacobian_bound(self):
        """c_SiLU ||W_read|| ||W_lift|| (ungated branch)."""
        return C_SILU * np.linalg.norm(self.w_read, 2) * np.linalg.norm(self.w_lift, 2)


def standard_mlp_params(d, width):
    """Parameter count of a gated SwiGLU-style MLP with the same width."""
    return 3 * d * width

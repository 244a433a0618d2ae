from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from .errors import InvalidConfig


@dataclass(frozen=True)
class SkaConfig:
    """Hyper-parameters of one SKA head.

    ``ridge_eps`` is added to the Gram matrix at estimation time only; the
    accumulated statistics never contain it.
    """

    rank_r: int = 24
    head_dim_p: int = 32
    ridge_eps: float = 1e-3
    power_k: int = 2
    gamma: float = 1.0
    eta: float = 1.5
    chunk_size_s: int = 64
    power_iters: int = 6
    jitter: float = 1e-4
    power_seed: int = 0

    def __post_init__(self):
        ints = ("rank_r", "head_dim_p", "chunk_size_s", "power_iters")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.power_k, bool) or not isinstance(self.power_k, int) or self.power_k < 0:
            raise InvalidConfig(f"power_k must be a non-negative integer, got {self.power_k!r}")
        for name in ("ridge_eps", "eta", "jitter"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name} must be finite and > 0, got {v!r}")
        g = self.gamma
        if not (isinstance(g, (int, float)) and math.isfinite(g) and 1.0 <= g <= 1.5):
            raise InvalidConfig(f"gamma must lie in [1, 1.5], got {g!r}")

    def with_(self, **kw) -> "SkaConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

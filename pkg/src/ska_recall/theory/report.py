from __future__ import annotations

from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

REL_SLACK = 1e-9


def within(lhs, rhs) -> bool:
    return lhs <= rhs * (1 + REL_SLACK) if rhs >= 0 else lhs <= rhs


@dataclass
class BoundReport:
    """Outcome of one bound check: satisfied iff lhs <= rhs (1 + 1e-9) on
    every trial.

    For multi-trial checks ``lhs``/``rhs`` come from the trial closest to
    violation (largest lhs/rhs), and ``margin`` is ``rhs - lhs`` there.
    """

    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    trials: int = 1
    violations: int = 0
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["satisfied"] = bool(d["satisfied"])
        return d


def single(name, lhs, rhs, **detail) -> BoundReport:
    lhs, rhs = float(lhs), float(rhs)
    ok = within(lhs, rhs)
    return BoundReport(name, lhs, rhs, ok, rhs - lhs, 1, 0 if ok else 1, detail)


class Tally:
    """Accumulates (lhs, rhs) pairs over trials into one BoundReport."""

    def __init__(self, name):
        self.name = name
        self.n = 0
        self.bad = 0
        self.worst = None
        self.detail = {}

    def add(self, lhs, rhs):
        lhs, rhs = float(lhs), float(rhs)
        self.n += 1
        if not within(lhs, rhs):
            self.bad += 1
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= 0 else np.inf)
        if self.worst is None or ratio > self.worst[0]:
            self.worst = (ratio, lhs, rhs)

    def report(self) -> BoundReport:
        if self.worst is None:
            return BoundReport(self.name, 0.0, 0.0, True, 0.0, 0, 0, self.detail)
        _, lhs, rhs = self.worst
        return BoundReport(self.name, lhs, rhs, self.bad == 0, rhs - lhs, self.n, self.bad,
                           dict(self.detail))


def round3(x: float) -> float:
    """Round half-up on the exact binary value, to three decimals."""
    return float(Decimal(float(x)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def power_table(ks=(2, 4), rhos=(0.95, 0.90, 0.70, 0.50, 0.30)) -> dict:
    """{K: {rho: rho**K rounded to 3 decimals}}."""
    return {k: {r: round3(r ** k) for r in rhos} for k in ks}

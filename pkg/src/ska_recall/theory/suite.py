from __future__ import annotations

import numpy as np

from ..config import SkaConfig
from ..operator import estimate
from .checks import CHECKS, DEFAULT_TRIALS, eigvals
from .report import BoundReport, power_table

# reference power filters rho**K to three decimals
PUBLISHED_POWER_TABLE = {
    2: {0.95: 0.902, 0.90: 0.810, 0.70: 0.490, 0.50: 0.250, 0.30: 0.090},
    4: {0.95: 0.815, 0.90: 0.656, 0.70: 0.240, 0.50: 0.063, 0.30: 0.008},
}


def check_power_table(rng=None, trials=None) -> BoundReport:
    got = power_table()
    mism = [(k, r) for k, row in PUBLISHED_POWER_TABLE.items() for r, v in row.items()
            if got[k][r] != v]
    n = sum(len(row) for row in PUBLISHED_POWER_TABLE.values())
    return BoundReport("power_table", float(len(mism)), 0.0, not mism, -float(len(mism)),
                       n, len(mism), {"table": {str(k): {str(r): v for r, v in row.items()}
                                                 for k, row in got.items()}})


CHECKS["power_table"] = check_power_table


def run_suite(only=None, seed=0, trials=500, inject_fault=False) -> list[BoundReport]:
    """Run the named checks (all by default) with fixed-seed trials."""
    names = list(CHECKS) if not only else list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, i])
        n = max(trials, DEFAULT_TRIALS.get(name, 0)) if trials >= 500 else trials
        out.append(CHECKS[name](rng, n))
    if inject_fault:
        out.append(BoundReport("injected_fault", 1.0, 0.0, False, -1.0, 1, 1,
                               {"note": "deliberate violation for exit-code testing"}))
    return out


def spectrum_summary(stats, cfg: SkaConfig, bins=10) -> dict:
    """Conditioning and spectral diagnostics of one set of statistics."""
    lam = np.linalg.eigvalsh(stats.g + cfg.ridge_eps * np.eye(stats.g.shape[0]))
    op = estimate(stats, cfg)
    a_w = op.a_hat * max(op.sigma_max, 1.0) / cfg.gamma
    mods = np.abs(eigvals(op.a_hat))
    hist, edges = np.histogram(mods, bins=bins, range=(0.0, cfg.gamma))
    return {
        "lambda_min": float(lam[0]),
        "lambda_max": float(lam[-1]),
        "kappa": float(lam[-1] / lam[0]),
        "sigma_max_whitened": float(np.linalg.norm(a_w, 2)),
        "sigma_max_power_iteration": op.sigma_max,
        "eig_modulus_hist": {"counts": [int(c) for c in hist],
                             "edges": [round(float(e), 12) for e in edges]},
    }

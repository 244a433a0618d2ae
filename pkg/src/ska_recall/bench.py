"""Per-step decoding cost of the recurrent state at increasing context length."""

from __future__ import annotations

import time

import numpy as np

from .config import SkaConfig
from .engine import RecurrentState
from .linalg import BACKEND
from .stats import accumulate_prefix

FLATNESS_LIMIT = 2.0
CUBIC_MIN_RATIO = 4.0


def _prefilled_state(cfg, t, rng):
    keys = rng.standard_normal((t, cfg.rank_r))
    m = float(np.max(np.linalg.norm(keys, axis=1)))
    state = RecurrentState(cfg, m)
    state.stats = accumulate_prefix(keys / m, rng.standard_normal((t, cfg.head_dim_p)), max_norm=m)
    return state


class _Probe:
    """A prefilled state plus a fixed stream of decode inputs."""

    def __init__(self, cfg, t, steps, seed, warmup=5):
        rng = np.random.default_rng(seed)
        self.state = _prefilled_state(cfg, t, rng)
        self.z = rng.standard_normal((steps + warmup, cfg.rank_r))
        self.v = rng.standard_normal((steps + warmup, cfg.head_dim_p))
        self.warmup = warmup

    def block(self) -> float:
        """Median nanoseconds of one decode step over a block."""
        times = []
        for i in range(len(self.z)):
            t0 = time.perf_counter_ns()
            self.state.decode(self.z[i], self.v[i], self.z[i])
            dt = time.perf_counter_ns() - t0
            if i >= self.warmup:
                times.append(dt)
        return float(np.median(times))


def _interleaved(probes, repeats) -> list[float]:
    # round-robin so a burst of scheduler noise hits every probe alike;
    # the per-probe minimum of block medians is kept
    best = [float("inf")] * len(probes)
    for _ in range(repeats):
        for i, p in enumerate(probes):
            best[i] = min(best[i], p.block())
    return [b / 1000.0 for b in best]


def step_time_us(cfg: SkaConfig, t: int, steps=40, seed=0, repeats=5) -> float:
    """Wall time of one decode step (update, re-estimate, retrieve) after a
    prefill of ``t`` tokens."""
    return _interleaved([_Probe(cfg, t, steps, seed)], repeats)[0]


def run_bench(rank=24, head_dim=32, min_exp=6, max_exp=13, steps=40, seed=0,
              cubic=True, repeats=7) -> dict:
    cfg = SkaConfig(rank_r=rank, head_dim_p=head_dim)
    step_time_us(cfg, 64, steps=5, seed=seed, repeats=1)  # compile / warm caches
    ts = [2 ** e for e in range(min_exp, max_exp + 1)]
    probes = [_Probe(cfg, t, steps, seed) for t in ts]
    us = _interleaved(probes, repeats)
    grid = [{"T": t, "step_us": round(u, 3), "state_bytes": p.state.state_bytes,
             "state_floats": int(p.state.snapshot().size)}
            for t, u, p in zip(ts, us, probes)]
    ratio = max(us) / min(us)
    out = {
        "backend": BACKEND,
        "config": cfg.to_dict(),
        "grid": grid,
        "flatness_ratio": round(ratio, 4),
        "flat_ok": ratio < FLATNESS_LIMIT,
        "state_bytes_constant": len({g["state_bytes"] for g in grid}) == 1,
    }
    if cubic:
        pr = [_Probe(SkaConfig(rank_r=r, head_dim_p=head_dim), 1024, steps, seed) for r in (24, 48)]
        a, b = _interleaved(pr, repeats)
        out["rank_scaling"] = {"r24_us": round(a, 3), "r48_us": round(b, 3),
                               "ratio": round(b / a, 4),
                               "ok": b / a >= CUBIC_MIN_RATIO}
    return out


def bench_passed(report: dict) -> bool:
    """Flat per-step time and constant state bytes. The rank-scaling ratio is
    reported alongside but does not gate: on small r the fixed per-call cost
    and the O(r^2) terms keep it below the asymptotic cubic factor."""
    return bool(report["flat_ok"] and report["state_bytes_constant"])

"""Time the hot kernels under the numba and pure-numpy backends.

The backend is fixed at import time by SKA_RECALL_BACKEND, so each backend
runs in its own interpreter.

    python benchmarks/bench_backends.py [--rank 24] [--head-dim 32] [--reps 200]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from ska_recall.linalg import BACKEND, kernels
from ska_recall.stats import accumulate_prefix
from ska_recall.engine import RecurrentState
from ska_recall.config import SkaConfig
from ska_recall.operator import estimate, retrieve_ska

r, p, reps = (int(a) for a in sys.argv[1:4])
rng = np.random.default_rng(0)
keys = rng.standard_normal((4096, r)) / np.sqrt(r)
vals = rng.standard_normal((4096, p))
cfg = SkaConfig(rank_r=r, head_dim_p=p)
st = accumulate_prefix(keys, vals)
op = estimate(st, cfg)
q = rng.standard_normal(r)
state = RecurrentState(cfg, 1.0)
state.stats = st.copy()

def t(f, n):
    f()
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter_ns()
        for _ in range(n):
            f()
        best = min(best, (time.perf_counter_ns() - t0) / n)
    return best / 1000.0

out = {
    "backend": BACKEND,
    "accumulate_4096_us": t(lambda: accumulate_prefix(keys, vals), max(1, reps // 50)),
    "estimate_us": t(lambda: estimate(st, cfg), reps),
    "retrieve_us": t(lambda: retrieve_ska(op, q), reps),
    "decode_step_us": t(lambda: state.decode(keys[0], vals[0], q), reps),
}
print(json.dumps(out))
"""


def run(backend, rank, head_dim, reps):
    env = dict(os.environ)
    if backend == "numpy":
        env["SKA_RECALL_BACKEND"] = "numpy"
    else:
        env.pop("SKA_RECALL_BACKEND", None)
    res = subprocess.run([sys.executable, "-c", CHILD, str(rank), str(head_dim), str(reps)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rank", type=int, default=24)
    ap.add_argument("--head-dim", type=int, default=32)
    ap.add_argument("--reps", type=int, default=200)
    a = ap.parse_args()
    rows = {b: run(b, a.rank, a.head_dim, a.reps) for b in ("numba", "numpy")}
    print(f"r={a.rank} P={a.head_dim}")
    print(f"{'kernel':<22}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for key in ("accumulate_4096_us", "estimate_us", "retrieve_us", "decode_step_us"):
        nb, npy = rows["numba"][key], rows["numpy"][key]
        print(f"{key[:-3]:<22}{nb:>12.2f}{npy:>12.2f}{npy / nb:>9.1f}x")


if __name__ == "__main__":
    main()

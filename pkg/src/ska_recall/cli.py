"""``ska-recall`` command line: gen, run, verify, spectrum, bench.

Reports are canonical JSON (sorted keys). Exit codes: 0 success, 1 a check or
benchmark assertion failed, 2 usage or parameter error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

import numpy as np

from .config import SkaConfig
from .engine import MODES, SCHEMES, episode_features, evaluate, make_scheme, prefill_max_norm
from .errors import EmptyDataset, InvalidConfig, ParseError
from .stats import accumulate_masked, accumulate_prefix, chunk_statistics, prefix_statistics
from .tasks import FAMILIES, TIERS, generate, read_jsonl, write_jsonl

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class _Usage(Exception):
    pass


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def episode_seed(seed: int, index: int) -> int:
    """Per-episode seed derived from the run seed; distinct runs never collide."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _config(args, **defaults) -> SkaConfig:
    kw = dict(defaults)
    for flag, field in (("rank", "rank_r"), ("head_dim", "head_dim_p"), ("eps", "ridge_eps"),
                        ("k", "power_k"), ("gamma", "gamma"), ("eta", "eta"),
                        ("chunk", "chunk_size_s")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[field] = v
    return SkaConfig(**kw)


@contextmanager
def _output(path, mode="w"):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, mode, encoding="utf-8") as fh:
            yield fh


def _emit(args, obj):
    with _output(args.out) as fh:
        fh.write(canonical(obj) + "\n")


def _load(path):
    if path in (None, "-"):
        return list(read_jsonl(sys.stdin))
    with open(path, encoding="utf-8") as fh:
        return list(read_jsonl(fh))


def _cells(args):
    # every combination of the list-valued grid flags
    kvs = args.kv or [None]
    gaps = args.gap or [None]
    lens = args.seq_len or [None]
    return [(kv, gap, sl) for kv in kvs for gap in gaps for sl in lens]


def cmd_gen(args) -> int:
    if args.family not in FAMILIES:
        raise _Usage(f"unknown family {args.family!r}")
    if args.n < 0:
        raise _Usage("--n must be >= 0")
    episodes = []
    for c, (kv, gap, sl) in enumerate(_cells(args)):
        for i in range(args.n):
            s = episode_seed(args.seed, c * args.n + i)
            episodes.append(generate(args.family, s, args.tier, kv=kv, gap=gap, seq_len=sl))
    with _output(args.out) as fh:
        write_jsonl(episodes, fh)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args, rank_r=32, head_dim_p=32, power_k=0)
    episodes = _load(args.dataset)
    scheme = make_scheme(args.scheme, cfg.rank_r, cfg.head_dim_p, seed=args.seed)
    report = evaluate(episodes, scheme, cfg, args.mode, args.fp32, args.workers)
    _emit(args, report)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .theory import run_suite

    only = [n.replace("-", "_") for n in args.only] if args.only else None
    try:
        reports = run_suite(only, seed=args.seed, inject_fault=args.inject_fault)
    except KeyError as e:
        raise _Usage(str(e.args[0])) from None
    ok = all(r.satisfied for r in reports)
    _emit(args, {"passed": ok, "seed": args.seed, "checks": [r.to_dict() for r in reports]})
    return EXIT_OK if ok else EXIT_FAIL


def _prefill_stats(ep, scheme, cfg, mode):
    z, v = episode_features(ep, scheme)
    m = prefill_max_norm(z, ep.prefill_boundary)
    z = z / m
    b = ep.prefill_boundary
    if mode == "prefix":
        return accumulate_prefix(z[:b], v[:b], max_norm=m)
    if mode == "masked":
        return accumulate_masked(z, v, np.asarray(ep.mask, dtype=bool), max_norm=m)
    chunks = chunk_statistics(z, v, chunk_size=cfg.chunk_size_s, max_norm=m)
    return prefix_statistics(chunks, b // cfg.chunk_size_s)


def cmd_spectrum(args) -> int:
    from .theory import spectrum_summary

    cfg = _config(args, rank_r=32, head_dim_p=32)
    scheme = make_scheme(args.scheme, cfg.rank_r, cfg.head_dim_p, seed=args.seed)
    episodes = _load(args.dataset)
    if not episodes:
        raise EmptyDataset("no episodes in dataset")
    rows = []
    for i, ep in enumerate(episodes):
        d = spectrum_summary(_prefill_stats(ep, scheme, cfg, args.mode), cfg)
        rows.append({"index": i, "family": ep.family, "cell": ep.cell(), **d})
    _emit(args, {"config": {**cfg.to_dict(), "mode": args.mode, "scheme": args.scheme},
                 "episodes": rows})
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_passed, run_bench

    cfg = _config(args)
    report = run_bench(rank=cfg.rank_r, head_dim=cfg.head_dim_p, seed=args.seed)
    report["passed"] = bench_passed(report)
    _emit(args, report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _add_ska(p):
    p.add_argument("--rank", type=int, help="feature rank r")
    p.add_argument("--head-dim", type=int, help="value dimension P")
    p.add_argument("--eps", type=float, help="ridge regularizer")
    p.add_argument("--k", type=int, help="power-filter exponent K")
    p.add_argument("--gamma", type=float, help="spectral rescale in [1, 1.5]")
    p.add_argument("--eta", type=float, help="output scale")
    p.add_argument("--chunk", type=int, help="chunk size S for chunk-causal mode")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ska-recall", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a JSONL episode dataset")
    g.add_argument("--family", required=True, choices=FAMILIES)
    g.add_argument("--tier", choices=TIERS)
    g.add_argument("--kv", type=int, nargs="+", help="key/value pair counts (grid)")
    g.add_argument("--gap", type=int, nargs="+", help="distractor gap lengths (grid)")
    g.add_argument("--seq-len", type=int, nargs="+", help="sequence lengths (grid)")
    g.add_argument("--n", type=int, default=100, help="episodes per grid cell")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_gen)

    for name, func, hlp in (("run", cmd_run, "evaluate retrieval accuracy on a dataset"),
                            ("spectrum", cmd_spectrum, "conditioning diagnostics per episode")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("dataset", nargs="?", help="JSONL episodes (default stdin)")
        _add_ska(p)
        p.add_argument("--mode", choices=MODES, default="prefix")
        p.add_argument("--scheme", choices=SCHEMES, default="orthogonal")
        p.add_argument("--seed", type=int, default=0, help="embedding seed")
        p.add_argument("--out")
        if name == "run":
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--fp32", action="store_true", help="estimate in float32")
        p.set_defaults(func=func)

    v = sub.add_parser("verify", help="run the numerical bound suite")
    v.add_argument("--only", nargs="+", help="check names (hyphens or underscores)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="per-step decode cost against context length")
    _add_ska(b)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (_Usage, InvalidConfig) as e:
        print(f"ska-recall: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, EmptyDataset, OSError) as e:
        print(f"ska-recall: error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # generator parameter errors (RangeExhausted, bad kv/gap, ...)
        print(f"ska-recall: error: {e}", file=sys.stderr)
        return EXIT_USAGE

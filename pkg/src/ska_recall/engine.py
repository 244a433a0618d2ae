"""Recall engine: embed episodes with fixed projections and answer queries
with SKA retrieval in parallel (prefix / masked / chunk-causal) or
token-by-token recurrent form."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import SkaConfig
from .errors import EmptyDataset, KeyCapacityExceeded, NotPositiveDefinite
from .linalg import BACKEND, kernels
from .operator import KoopmanOperator, _start, estimate, retrieve_ska
from .stats import (MAX_NORM_FLOOR, SufficientStats, accumulate_masked, accumulate_prefix,
                    chunk_statistics, empty_stats, merge, prefix_statistics)
from .tasks.episode import Episode
from .tasks.vocab import VOCAB, Vocab

MODES = ("prefix", "masked", "chunk-causal")
SCHEMES = ("orthogonal", "random-gaussian")


def _hadamard(n):
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(n)


def _orthonormal_basis(r):
    # Sylvester-Hadamard rows when r is a power of two, else the standard basis
    if r & (r - 1) == 0:
        return _hadamard(r)
    return np.eye(r)


@dataclass(frozen=True)
class EmbeddingScheme:
    """Token-indexed key/query/value tables.

    Keys are read from the *previous* token, so position t binds
    key(token[t-1]) to value(token[t]). ``value_tokens[j]`` is the token
    decoded from value coordinate j.
    """

    kind: str
    key_table: np.ndarray     # (vocab, r)
    query_table: np.ndarray   # (vocab, r)
    value_table: np.ndarray   # (vocab, P)
    value_tokens: tuple[int, ...]

    @property
    def rank(self):
        return self.key_table.shape[1]

    @property
    def head_dim(self):
        return self.value_table.shape[1]


def _value_table(vocab, head_dim, value_tokens, scale=1.0):
    if value_tokens is None:
        order = (list(vocab.values) + list(vocab.digits) + list(vocab.distractors)
                 + list(vocab.keys) + list(vocab.agents))
        value_tokens = order[:head_dim]
    value_tokens = tuple(int(t) for t in value_tokens)
    if len(value_tokens) > head_dim:
        raise KeyCapacityExceeded(f"{len(value_tokens)} value tokens need P >= {len(value_tokens)}")
    table = np.zeros((vocab.size, head_dim))
    for j, t in enumerate(value_tokens):
        table[t, j] = scale
    return table, value_tokens


def orthogonal_scheme(rank, head_dim, vocab: Vocab = VOCAB, key_tokens=None,
                      value_tokens=None, seed=0) -> EmbeddingScheme:
    """Distinct key tokens get orthonormal keys; all other tokens get zero.

    Raises KeyCapacityExceeded when there are more key tokens than ``rank``.
    """
    key_tokens = list(vocab.keys) if key_tokens is None else [int(t) for t in key_tokens]
    if len(set(key_tokens)) > rank:
        raise KeyCapacityExceeded(f"{len(set(key_tokens))} distinct keys need r >= {len(set(key_tokens))}")
    basis = _orthonormal_basis(rank)[np.random.default_rng(seed).permutation(rank)]
    keys = np.zeros((vocab.size, rank))
    for i, t in enumerate(dict.fromkeys(key_tokens)):
        keys[t] = basis[i]
    vals, vt = _value_table(vocab, head_dim, value_tokens)
    return EmbeddingScheme("orthogonal", keys, keys, vals, vt)


def random_scheme(rank, head_dim, vocab: Vocab = VOCAB, value_tokens=None, seed=0) -> EmbeddingScheme:
    """Every token gets an i.i.d. N(0, 1/r) key; queries share the key table."""
    keys = np.random.default_rng(seed).standard_normal((vocab.size, rank)) / np.sqrt(rank)
    vals, vt = _value_table(vocab, head_dim, value_tokens)
    return EmbeddingScheme("random-gaussian", keys, keys, vals, vt)


def make_scheme(kind, rank, head_dim, vocab: Vocab = VOCAB, seed=0) -> EmbeddingScheme:
    if kind == "orthogonal":
        return orthogonal_scheme(rank, head_dim, vocab, seed=seed)
    if kind == "random-gaussian":
        return random_scheme(rank, head_dim, vocab, seed=seed)
    raise ValueError(f"unknown scheme {kind!r}")


def decode(y, scheme: EmbeddingScheme) -> int:
    """Argmax over value coordinates; ties go to the lowest token id."""
    y = np.asarray(y)
    best = np.flatnonzero(y == y.max())
    return min(scheme.value_tokens[j] for j in best)


@dataclass(frozen=True)
class QueryResult:
    position: int
    outputs: np.ndarray           # (n_answer_tokens, P)
    decoded: tuple[int, ...]
    answer: tuple[int, ...]

    @property
    def correct(self) -> bool:
        return self.decoded == self.answer


def episode_features(ep: Episode, scheme: EmbeddingScheme):
    """Raw (unnormalized) keys and values per position."""
    tok = np.asarray(ep.tokens, dtype=np.int64)
    z = np.zeros((len(tok), scheme.rank))
    z[1:] = scheme.key_table[tok[:-1]]
    v = scheme.value_table[tok]
    return z, v


def query_features(ep: Episode, scheme: EmbeddingScheme, q) -> np.ndarray:
    """One query vector per answer token (teacher forcing after the first)."""
    toks = [ep.tokens[q.position]] + list(q.answer_tokens[:-1])
    return scheme.query_table[np.asarray(toks, dtype=np.int64)]


def prefill_max_norm(z, boundary) -> float:
    """Largest key norm over positions before the first query token."""
    head = z[:max(boundary, 0)]
    m = float(np.max(np.linalg.norm(head, axis=1))) if head.shape[0] else 0.0
    return max(m, MAX_NORM_FLOOR)


def _as32(stats: SufficientStats) -> SufficientStats:
    f = np.float32
    return SufficientStats(stats.g.astype(f), stats.m.astype(f), stats.c_v.astype(f),
                           None, stats.max_norm, stats.count)


def _answer(ep, scheme, op, q, m, dtype):
    qs = query_features(ep, scheme, q) / m
    out = np.stack([retrieve_ska(op, qv.astype(dtype)) for qv in qs])
    dec = tuple(decode(y, scheme) for y in out)
    return QueryResult(q.position, out.astype(np.float64), dec, tuple(q.answer_tokens))


def run_parallel(ep: Episode, scheme: EmbeddingScheme, cfg: SkaConfig, mode="prefix",
                 fp32=False) -> list[QueryResult]:
    """Answer every query of ``ep`` from batch-accumulated statistics.

    prefix: causal statistics over positions 0..pos of each query.
    masked: one operator from all positions with mask == 1.
    chunk-causal: statistics of the complete chunks before the query's chunk.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    z, v = episode_features(ep, scheme)
    m = prefill_max_norm(z, ep.prefill_boundary)
    z = z / m
    dtype = np.float32 if fp32 else np.float64

    def est(stats):
        return estimate(_as32(stats) if fp32 else stats, cfg)

    results = {}
    order = sorted(range(len(ep.queries)), key=lambda i: ep.queries[i].position)
    if mode == "prefix":
        stats = empty_stats(scheme.rank, scheme.head_dim, m)
        cursor = 0
        op = None
        for i in order:
            q = ep.queries[i]
            if q.position + 1 > cursor:
                seg = accumulate_prefix(z[cursor:q.position + 1], v[cursor:q.position + 1],
                                        prev_key=stats.prev_key, max_norm=m)
                stats = merge(stats, seg)
                cursor = q.position + 1
                op = None
            op = op or est(stats)
            results[i] = _answer(ep, scheme, op, q, m, dtype)
    elif mode == "masked":
        op = est(accumulate_masked(z, v, np.asarray(ep.mask, dtype=bool), max_norm=m))
        for i in order:
            results[i] = _answer(ep, scheme, op, ep.queries[i], m, dtype)
    else:
        chunks = chunk_statistics(z, v, chunk_size=cfg.chunk_size_s, max_norm=m)
        ops = {}
        for i in order:
            q = ep.queries[i]
            c = q.position // cfg.chunk_size_s
            if c not in ops:
                ops[c] = est(prefix_statistics(chunks, c))
            results[i] = _answer(ep, scheme, ops[c], q, m, dtype)
    return [results[i] for i in range(len(ep.queries))]


class RecurrentState:
    """O(1) decoding state: G, M, C_v, previous key and the frozen max-norm.

    The operator is cached and only re-estimated after new tokens arrive.
    """

    def __init__(self, cfg: SkaConfig, max_norm: float, fp32=False):
        self.cfg = cfg
        self.max_norm = float(max_norm)
        self.stats = empty_stats(cfg.rank_r, cfg.head_dim_p, self.max_norm)
        self.fp32 = fp32
        self._op: KoopmanOperator | None = None
        r, p = cfg.rank_r, cfg.head_dim_p
        self._buf = np.zeros(2 * r * r + p * r + r)
        self._work = np.zeros(kernels.workspace_size(r))
        self._views = None
        self._fparams = np.array([cfg.ridge_eps, cfg.jitter, cfg.gamma, cfg.eta,
                                  cfg.power_iters, cfg.power_k, self.max_norm])
        self._v0 = _start(r, cfg.power_seed, np.dtype(np.float64))

    @property
    def float_count(self) -> int:
        return self.stats.float_count

    @property
    def state_bytes(self) -> int:
        return (4 if self.fp32 else 8) * self.float_count

    def snapshot(self) -> np.ndarray:
        a = self.stats.to_array()
        return a.astype(np.float32) if self.fp32 else a

    def step(self, key, value):
        self.stats.step(np.asarray(key, dtype=np.float64) / self.max_norm,
                        np.asarray(value, dtype=np.float64))
        self._op = None

    def operator(self) -> KoopmanOperator:
        if isinstance(self._op, tuple):
            sigma, used = self._op
            rr = self.cfg.rank_r ** 2
            r = self.cfg.rank_r
            self._op = KoopmanOperator(self._work[:rr].reshape(r, r).copy(),
                                       self._work[rr:2 * rr].reshape(r, r).copy(),
                                       self.stats.c_v.copy(), float(sigma), float(used), self.cfg)
        if self._op is None:
            self._op = estimate(_as32(self.stats) if self.fp32 else self.stats, self.cfg)
        return self._op

    def retrieve(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64) / self.max_norm
        op = self.operator()
        return retrieve_ska(op, q.astype(op.l.dtype))

    def decode(self, key, value, query) -> np.ndarray:
        """step(key, value) followed by retrieve(query) in one kernel call."""
        if self.fp32:
            self.step(key, value)
            return self.retrieve(query)
        st, cfg = self.stats, self.cfg
        vw = self._views
        if vw is None or st.g is not vw[0] or st.m is not vw[1] or st.c_v is not vw[2] \
                or st.prev_key is not vw[3]:
            self._pack()
        y, sigma, used, ok = kernels.decode_fused(
            self._buf, self._work, np.asarray(key, dtype=np.float64),
            np.asarray(value, dtype=np.float64), np.asarray(query, dtype=np.float64),
            self._v0, self._fparams)
        st.count += 1
        if not ok:
            self._op = None
            raise NotPositiveDefinite(
                f"G + eps I is not positive definite even with jitter {cfg.jitter:g}")
        self._op = (sigma, used)  # materialized on demand by operator()
        return y

    def _pack(self):
        """Move the statistics into the flat kernel buffer and rebind them as views."""
        st, r, p = self.stats, self.cfg.rank_r, self.cfg.head_dim_p
        rr = r * r
        pk = st.prev_key if st.prev_key is not None else np.zeros(r)
        self._buf[:] = np.concatenate([st.g.ravel(), st.m.ravel(), st.c_v.ravel(), pk])
        st.g = self._buf[:rr].reshape(r, r)
        st.m = self._buf[rr:2 * rr].reshape(r, r)
        st.c_v = self._buf[2 * rr:2 * rr + p * r].reshape(p, r)
        st.prev_key = self._buf[2 * rr + p * r:]
        self._views = (st.g, st.m, st.c_v, st.prev_key)


def run_recurrent(ep: Episode, scheme: EmbeddingScheme, cfg: SkaConfig, fp32=False,
                  return_state=False):
    """Token-by-token prefix-mode evaluation with the max-norm frozen at the
    prefill boundary."""
    z, v = episode_features(ep, scheme)
    state = RecurrentState(cfg, prefill_max_norm(z, ep.prefill_boundary), fp32)
    by_pos = {}
    for i, q in enumerate(ep.queries):
        by_pos.setdefault(q.position, []).append(i)
    results = {}
    for t in range(len(ep.tokens)):
        state.step(z[t], v[t])
        for i in by_pos.get(t, ()):
            q = ep.queries[i]
            out = np.stack([state.retrieve(qv) for qv in query_features(ep, scheme, q)])
            dec = tuple(decode(y, scheme) for y in out)
            results[i] = QueryResult(q.position, out.astype(np.float64), dec, tuple(q.answer_tokens))
    res = [results[i] for i in range(len(ep.queries))]
    return (res, state) if return_state else res


def memory_crossover(r: int, p: int) -> tuple[int, int]:
    """(SKA state floats, smallest T whose KV cache T (r + P) exceeds it)."""
    floats = 2 * r * r + p * r + r + 1
    return floats, floats // (r + p) + 1


def state_bytes(r: int, p: int, fp32=False) -> int:
    return (4 if fp32 else 8) * memory_crossover(r, p)[0]


def _eval_one(args):
    ep, scheme, cfg, mode, fp32 = args
    res = run_parallel(ep, scheme, cfg, mode, fp32)
    return ep.family, ep.cell(), len(res), sum(r.correct for r in res)


def evaluate(episodes, scheme: EmbeddingScheme, cfg: SkaConfig, mode="prefix",
             fp32=False, workers=1) -> dict:
    """Accuracy report grouped by family and cell."""
    episodes = list(episodes)
    if not episodes:
        raise EmptyDataset("no episodes to evaluate")
    t0 = time.perf_counter()
    jobs = [(ep, scheme, cfg, mode, fp32) for ep in episodes]
    if workers > 1:
        from multiprocessing import get_context
        with get_context("spawn").Pool(workers) as pool:
            rows = pool.map(_eval_one, jobs, chunksize=max(1, len(jobs) // (4 * workers)))
    else:
        rows = [_eval_one(j) for j in jobs]
    per = {}
    for fam, cell, n, ok in rows:
        d = per.setdefault(fam, {}).setdefault(cell, {"episodes": 0, "queries": 0, "correct": 0})
        d["episodes"] += 1
        d["queries"] += n
        d["correct"] += ok
    for cells in per.values():
        for d in cells.values():
            d["accuracy"] = d["correct"] / d["queries"]
    return {
        "config": {**cfg.to_dict(), "mode": mode, "scheme": scheme.kind, "fp32": bool(fp32),
                   "backend": BACKEND},
        "per_family": per,
        "state_bytes": state_bytes(cfg.rank_r, cfg.head_dim_p, fp32),
        "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
    }

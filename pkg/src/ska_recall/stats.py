"""Sufficient statistics of a key/value stream.

All sums are accumulated with error-free transformations (exact products,
double-double running sums) and rounded once at the end, so any two ways of
partitioning the same set of products round to the same FP64 value. That is
what makes chunk-prefix reassembly agree with a full recomputation entrywise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyMask, IndexOutOfRange, OddDimension
from .linalg import kernels
from .linalg._numpy_kernels import _dd_add

MAX_NORM_FLOOR = 1e-6


@dataclass
class SufficientStats:
    """G = sum z z^T, M = sum z_t z_{t-1}^T, C_v = sum v z^T over one context.

    ``prev_key`` is the last key that can still pair with the next token
    (None when there is none). ``count`` is the number of keys in G.
    """

    g: np.ndarray
    m: np.ndarray
    c_v: np.ndarray
    prev_key: np.ndarray | None = None
    max_norm: float = 1.0
    count: int = 0

    @property
    def rank(self) -> int:
        return self.g.shape[0]

    @property
    def head_dim(self) -> int:
        return self.c_v.shape[0]

    @property
    def float_count(self) -> int:
        r, p = self.rank, self.head_dim
        return 2 * r * r + p * r + r + 1

    def copy(self) -> "SufficientStats":
        pk = None if self.prev_key is None else self.prev_key.copy()
        return SufficientStats(self.g.copy(), self.m.copy(), self.c_v.copy(),
                               pk, self.max_norm, self.count)

    def step(self, z, v):
        """In-place single-token update (plain FP64, used by the recurrent path)."""
        zprev = self.prev_key if self.prev_key is not None else np.zeros_like(z)
        kernels.rank1_update(self.g, self.m, self.c_v, z, zprev, v)
        self.prev_key = np.array(z, copy=True)
        self.count += 1

    def to_array(self) -> np.ndarray:
        """Flat persisted state: G, M, C_v, prev_key, max_norm."""
        pk = self.prev_key if self.prev_key is not None else np.zeros(self.rank)
        return np.concatenate([self.g.ravel(), self.m.ravel(), self.c_v.ravel(),
                               pk, [self.max_norm]])

    @classmethod
    def from_array(cls, flat, rank, head_dim) -> "SufficientStats":
        r, p = rank, head_dim
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != 2 * r * r + p * r + r + 1:
            raise DimensionMismatch(f"expected {2*r*r + p*r + r + 1} floats, got {flat.size}")
        g = flat[:r * r].reshape(r, r).copy()
        m = flat[r * r:2 * r * r].reshape(r, r).copy()
        c = flat[2 * r * r:2 * r * r + p * r].reshape(p, r).copy()
        pk = flat[2 * r * r + p * r:-1].copy()
        # the zero vector is a neutral previous key, so emptiness needs no flag
        return cls(g, m, c, pk, float(flat[-1]), -1)


def empty_stats(rank, head_dim, max_norm=1.0) -> SufficientStats:
    return SufficientStats(np.zeros((rank, rank)), np.zeros((rank, rank)),
                           np.zeros((head_dim, rank)), None, max_norm, 0)


def sequence_max_normalize(keys, queries=None):
    """Divide keys (and queries) by the largest key norm, floored at 1e-6.

    Returns ``(keys / m, queries / m, m)``; queries never influence ``m``.
    """
    keys = np.asarray(keys, dtype=np.float64)
    if keys.ndim != 2:
        raise DimensionMismatch("keys must be (T, r)")
    m = float(np.max(np.linalg.norm(keys, axis=1))) if keys.shape[0] else 0.0
    m = max(m, MAX_NORM_FLOOR)
    q = None if queries is None else np.asarray(queries, dtype=np.float64) / m
    return keys / m, q, m


def _check_kv(keys, values):
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if keys.ndim != 2 or values.ndim != 2:
        raise DimensionMismatch("keys and values must be 2-D")
    if keys.shape[0] != values.shape[0]:
        raise DimensionMismatch(f"{keys.shape[0]} keys vs {values.shape[0]} values")
    if not (np.all(np.isfinite(keys)) and np.all(np.isfinite(values))):
        raise ValueError("keys/values must be finite")
    return keys, values


def _dd_outer(a, b, symmetric=False, hi=None, lo=None):
    """Double-double sum of a[t] b[t]^T; rows where either side is zero are skipped."""
    if hi is None:
        hi = np.zeros((a.shape[1], b.shape[1]))
        lo = np.zeros_like(hi)
    if a.shape[0]:
        keep = np.any(a != 0.0, axis=1) & np.any(b != 0.0, axis=1)
        if keep.any():
            kernels.outer_sum_dd(a[keep], b[keep], hi, lo, symmetric)
    return hi, lo


def _pairs(keys, prev_key, mask=None):
    """Index arrays (cur, prev) for the lag pairs, with prev == -1 meaning prev_key."""
    t = keys.shape[0]
    cur = np.arange(1, t)
    ok = np.ones(t - 1 if t else 0, dtype=bool)
    if mask is not None:
        ok = mask[1:] & mask[:-1]
    cur = cur[ok]
    a = keys[cur]
    b = keys[cur - 1]
    if prev_key is not None and t and (mask is None or mask[0]):
        a = np.vstack([keys[:1], a])
        b = np.vstack([np.asarray(prev_key, dtype=np.float64)[None, :], b])
    return a, b


def _accumulate(keys, values, mask, prev_key, max_norm):
    keys, values = _check_kv(keys, values)
    r = keys.shape[1]
    if prev_key is not None:
        prev_key = np.asarray(prev_key, dtype=np.float64)
        if prev_key.shape != (r,):
            raise DimensionMismatch("prev_key must have length r")
    z = keys if mask is None else keys[mask]
    v = values if mask is None else values[mask]
    gh, gl = _dd_outer(z, z, symmetric=True)
    a, b = _pairs(keys, prev_key, mask)
    mh, ml = _dd_outer(a, b)
    ch, cl = _dd_outer(v, z)
    if keys.shape[0] == 0:
        last = prev_key
    elif mask is None or mask[-1]:
        last = keys[-1].copy()
    else:
        last = None
    return SufficientStats(gh + gl, mh + ml, ch + cl, last, float(max_norm), int(z.shape[0]))


def accumulate_prefix(keys, values, cfg=None, *, prev_key=None, max_norm=1.0) -> SufficientStats:
    """Statistics over every position of an (already normalized) stream.

    ``prev_key`` carries the last key of a preceding segment so that the
    boundary lag term is included; ``cfg`` is accepted for interface symmetry.
    """
    return _accumulate(keys, values, None, prev_key, max_norm)


def accumulate_masked(keys, values, mask, cfg=None, *, prev_key=None, max_norm=1.0) -> SufficientStats:
    """Statistics restricted to positions with ``mask == 1``.

    G and C_v include masked-in positions only; M includes the pair (t, t-1)
    only when both positions are masked in.
    """
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 1 or mask.shape[0] != np.shape(keys)[0]:
        raise DimensionMismatch("mask must have one entry per position")
    if not mask.any():
        raise EmptyMask("no position is masked in")
    return _accumulate(keys, values, mask, prev_key, max_norm)


def merge(left: SufficientStats, right: SufficientStats) -> SufficientStats:
    """Combine two disjoint, consecutive accumulations.

    ``right`` must have been accumulated with ``prev_key=left.prev_key``.
    """
    if left.g.shape != right.g.shape or left.c_v.shape != right.c_v.shape:
        raise DimensionMismatch("cannot merge statistics of different shapes")
    pk = right.prev_key if right.count or right.prev_key is not None else left.prev_key
    return SufficientStats(left.g + right.g, left.m + right.m, left.c_v + right.c_v,
                           None if pk is None else pk.copy(), left.max_norm,
                           left.count + right.count)


@dataclass
class ChunkStats:
    """Per-chunk statistics kept as double-double pairs (hi, lo)."""

    chunk_size: int
    g_hi: np.ndarray
    g_lo: np.ndarray
    m_hi: np.ndarray
    m_lo: np.ndarray
    c_hi: np.ndarray
    c_lo: np.ndarray
    first_keys: np.ndarray
    last_keys: np.ndarray
    counts: np.ndarray
    max_norm: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.g_hi.shape[0]

    @property
    def per_chunk(self):
        """List of (g_c, m_c, c_v_c, first_key, last_key)."""
        return [(self.g_hi[i] + self.g_lo[i], self.m_hi[i] + self.m_lo[i],
                 self.c_hi[i] + self.c_lo[i], self.first_keys[i], self.last_keys[i])
                for i in range(len(self))]


def chunk_statistics(keys, values, cfg=None, *, chunk_size=None, max_norm=1.0) -> ChunkStats:
    """Split the stream into ceil(T/S) chunks and accumulate each one.

    The within-chunk lag sum excludes the chunk's first position; the pair
    that crosses a chunk boundary is added back by ``prefix_statistics``.
    """
    keys, values = _check_kv(keys, values)
    s = chunk_size if chunk_size is not None else (cfg.chunk_size_s if cfg else 64)
    if s < 1:
        raise ValueError("chunk size must be >= 1")
    t, r = keys.shape
    p = values.shape[1]
    n = -(-t // s)
    out = ChunkStats(s, np.zeros((n, r, r)), np.zeros((n, r, r)), np.zeros((n, r, r)),
                     np.zeros((n, r, r)), np.zeros((n, p, r)), np.zeros((n, p, r)),
                     np.zeros((n, r)), np.zeros((n, r)), np.zeros(n, dtype=np.int64),
                     float(max_norm))
    for i in range(n):
        z = keys[i * s:(i + 1) * s]
        v = values[i * s:(i + 1) * s]
        _dd_outer(z, z, True, out.g_hi[i], out.g_lo[i])
        _dd_outer(z[1:], z[:-1], False, out.m_hi[i], out.m_lo[i])
        _dd_outer(v, z, False, out.c_hi[i], out.c_lo[i])
        out.first_keys[i] = z[0]
        out.last_keys[i] = z[-1]
        out.counts[i] = z.shape[0]
    return out


def prefix_statistics(chunks: ChunkStats, c: int, cfg=None) -> SufficientStats:
    """Exclusive prefix: everything in chunks 0..c-1, boundary lag terms included.

    ``c`` may equal ``len(chunks)``, which reassembles the full stream.
    """
    n = len(chunks)
    if not (0 <= c <= n):
        raise IndexOutOfRange(f"chunk index {c} outside [0, {n}]")
    r = chunks.g_hi.shape[1]
    p = chunks.c_hi.shape[1]
    if c == 0:
        return empty_stats(r, p, chunks.max_norm)
    gh, gl = chunks.g_hi[0].copy(), chunks.g_lo[0].copy()
    mh, ml = chunks.m_hi[0].copy(), chunks.m_lo[0].copy()
    ch, cl = chunks.c_hi[0].copy(), chunks.c_lo[0].copy()
    for i in range(1, c):
        gh, gl = _dd_add(gh, gl, chunks.g_hi[i], chunks.g_lo[i])
        mh, ml = _dd_add(mh, ml, chunks.m_hi[i], chunks.m_lo[i])
        ch, cl = _dd_add(ch, cl, chunks.c_hi[i], chunks.c_lo[i])
    if c > 1:
        _dd_outer(chunks.first_keys[1:c], chunks.last_keys[:c - 1], False, mh, ml)
    return SufficientStats(gh + gl, mh + ml, ch + cl, chunks.last_keys[c - 1].copy(),
                           chunks.max_norm, int(chunks.counts[:c].sum()))


def _pairs_of(key):
    key = np.asarray(key, dtype=np.float64)
    if key.shape[-1] % 2:
        raise OddDimension(f"lift needs an even length, got {key.shape[-1]}")
    return key[..., 0::2], key[..., 1::2]


def invariant_lift(key):
    """Per-pair squared modulus: (re, im) -> re^2 + im^2. Phase-invariant."""
    re, im = _pairs_of(key)
    return re * re + im * im


def harmonic_lift(key):
    """Per-pair square: (re, im) -> (re^2 - im^2, 2 re im).

    A rotation of the input pair by theta rotates the output pair by 2 theta.
    """
    re, im = _pairs_of(key)
    out = np.empty(re.shape[:-1] + (2 * re.shape[-1],))
    out[..., 0::2] = re * re - im * im
    out[..., 1::2] = 2.0 * re * im
    return out

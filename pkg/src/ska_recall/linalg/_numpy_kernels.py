"""Pure-numpy implementations of the hot kernels.

Signatures mirror ``_numba_kernels`` exactly so the two can be swapped.
"""

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1, Dekker split constant for binary64
_BLOCK = 256


def cholesky(a):
    """Return (L, ok). ok is False when a pivot is not strictly positive."""
    try:
        l = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return np.zeros_like(a), False
    if not np.all(np.isfinite(l)) or np.any(np.diag(l) <= 0.0):
        return np.zeros_like(a), False
    return l, True


def solve_lower(l, b):
    n = l.shape[0]
    x = np.empty_like(b, dtype=np.result_type(l, b))
    for i in range(n):
        x[i] = (b[i] - l[i, :i] @ x[:i]) / l[i, i]
    return x


def solve_upper(u, b):
    n = u.shape[0]
    x = np.empty_like(b, dtype=np.result_type(u, b))
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - u[i, i + 1:] @ x[i + 1:]) / u[i, i]
    return x


def power_sigma(a, v0, iters):
    v = v0 / np.linalg.norm(v0)
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    return float(np.linalg.norm(a @ v))


def estimate_fused(g, m, eps, jitter, v0, iters, gamma):
    r = g.shape[0]
    a = g + eps * np.eye(r, dtype=g.dtype)
    l, ok = cholesky(a)
    used = 0.0
    if not ok:
        l, ok = cholesky(a + jitter * np.eye(r, dtype=g.dtype))
        used = jitter
    if not ok:
        return l, np.zeros_like(m), 0.0, used, False
    a_w = solve_lower(l, solve_lower(l, m).T).T
    sigma = power_sigma(a_w, v0, iters) if np.any(a_w) else 0.0
    return l, a_w * (gamma / max(sigma, 1.0)), sigma, used, True


def retrieve_fused(l, a_hat, c_v, q, k, eta):
    w = solve_lower(l, q)
    for _ in range(k):
        w = a_hat @ w
    return eta * (c_v @ solve_upper(l.T, w))


def rank1_update(g, m, c, z, zprev, v):
    g += np.outer(z, z)
    m += np.outer(z, zprev)
    c += np.outer(v, z)


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _dd_add(h1, l1, h2, l2):
    s, e = _two_sum(h1, h2)
    e = e + (l1 + l2)
    h = s + e
    return h, e - (h - s)


def _block_products(a, b):
    p = a[:, :, None] * b[:, None, :]
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah[:, :, None] * bh[:, None, :] - p)
         + ah[:, :, None] * bl[:, None, :]
         + al[:, :, None] * bh[:, None, :]) + al[:, :, None] * bl[:, None, :]
    return p, e


def outer_sum_dd(a, b, hi, lo, symmetric):
    """Add sum_t a[t] b[t]^T into the double-double pair (hi, lo) in place.

    Products are split exactly and reduced pairwise; ``symmetric`` is accepted
    for signature parity and ignored.
    """
    n = a.shape[0]
    for start in range(0, n, _BLOCK):
        ph, pl = _block_products(a[start:start + _BLOCK], b[start:start + _BLOCK])
        while ph.shape[0] > 1:
            if ph.shape[0] % 2:
                ph = np.concatenate([ph, np.zeros_like(ph[:1])])
                pl = np.concatenate([pl, np.zeros_like(pl[:1])])
            ph, pl = _dd_add(ph[0::2], pl[0::2], ph[1::2], pl[1::2])
        h, l = _dd_add(hi, lo, ph[0], pl[0])
        hi[...] = h
        lo[...] = l


def workspace_size(r):
    return 3 * r * r + 6 * r


def decode_fused(buf, work, key, value, query, v0, fp):
    r, p = key.shape[0], value.shape[0]
    rr = r * r
    g = buf[:rr].reshape(r, r)
    m = buf[rr:2 * rr].reshape(r, r)
    c = buf[2 * rr:2 * rr + p * r].reshape(p, r)
    prev = buf[2 * rr + p * r:]
    z = key / fp[6]
    rank1_update(g, m, c, z, prev, value)
    prev[:] = z
    l, a_hat, sigma, used, ok = estimate_fused(g, m, fp[0], fp[1], v0, int(fp[4]), fp[2])
    work[:rr] = l.ravel()
    work[rr:2 * rr] = a_hat.ravel()
    if not ok:
        return np.zeros(p), sigma, used, False
    return retrieve_fused(l, a_hat, c, query / fp[6], int(fp[5]), fp[3]), sigma, used, True

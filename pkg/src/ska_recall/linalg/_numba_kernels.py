"""numba-compiled kernels. fastmath stays off: the double-double routines
depend on strict IEEE evaluation order."""

import numpy as np
from numba import njit

_SPLIT = 134217729.0


@njit(cache=True)
def _solve_lower_inplace(l, x):
    # row-oriented so the innermost loop runs over contiguous right-hand sides
    n, m = x.shape
    for i in range(n):
        for k in range(i):
            lik = l[i, k]
            if lik != 0.0:
                for c in range(m):
                    x[i, c] -= lik * x[k, c]
        d = l[i, i]
        for c in range(m):
            x[i, c] /= d


@njit(cache=True)
def _solve_lower_2d(l, b):
    x = b.copy()
    _solve_lower_inplace(l, x)
    return x


@njit(cache=True)
def _solve_upper_2d(u, b):
    n, m = b.shape
    x = b.copy()
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            uik = u[i, k]
            if uik != 0.0:
                for c in range(m):
                    x[i, c] -= uik * x[k, c]
        d = u[i, i]
        for c in range(m):
            x[i, c] /= d
    return x


def solve_lower(l, b):
    if b.ndim == 1:
        return _solve_lower_2d(l, b.reshape(-1, 1))[:, 0]
    return _solve_lower_2d(l, np.ascontiguousarray(b))


def solve_upper(u, b):
    if b.ndim == 1:
        return _solve_upper_2d(u, b.reshape(-1, 1))[:, 0]
    return _solve_upper_2d(u, np.ascontiguousarray(b))


@njit(cache=True)
def _norm(x):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i] * x[i]
    return np.sqrt(s)


@njit(cache=True)
def _power_into(a, v0, iters, at, v, av, w):
    # every inner loop is an axpy over a contiguous row, which vectorizes;
    # at, v, av, w are caller-provided scratch
    n, m = a.shape
    for i in range(n):
        for j in range(m):
            at[j, i] = a[i, j]
    nv = _norm(v0)
    for j in range(m):
        v[j] = v0[j] / nv
    for it in range(iters + 1):
        av[:] = 0.0
        for j in range(m):
            vj = v[j]
            for i in range(n):
                av[i] += at[j, i] * vj
        if it == iters:
            break
        w[:] = 0.0
        for i in range(n):
            ai = av[i]
            for j in range(m):
                w[j] += a[i, j] * ai
        nw = _norm(w)
        if nw == 0.0:
            break
        for j in range(m):
            v[j] = w[j] / nw
    return _norm(av)


@njit(cache=True)
def _power_sigma(a, v0, iters):
    n, m = a.shape
    return _power_into(a, v0, iters, np.empty((m, n)), np.empty(m), np.empty(n), np.empty(m))


def power_sigma(a, v0, iters):
    return float(_power_sigma(np.ascontiguousarray(a), np.ascontiguousarray(v0), iters))


@njit(cache=True)
def rank1_update(g, m, c, z, zprev, v):
    r = z.shape[0]
    for i in range(r):
        zi = z[i]
        for j in range(r):
            g[i, j] += zi * z[j]
            m[i, j] += zi * zprev[j]
    for i in range(v.shape[0]):
        vi = v[i]
        for j in range(r):
            c[i, j] += vi * z[j]


@njit(cache=True)
def _outer_sum_dd(a, b, hi, lo, symmetric):
    n, ra = a.shape
    rb = b.shape[1]
    bh = np.empty(rb)
    bl = np.empty(rb)
    for t in range(n):
        for j in range(rb):
            x = b[t, j]
            s = _SPLIT * x
            h = s - (s - x)
            bh[j] = h
            bl[j] = x - h
        for i in range(ra):
            x = a[t, i]
            if x == 0.0:
                continue
            s = _SPLIT * x
            ah = s - (s - x)
            al = x - ah
            j0 = i if symmetric else 0
            for j in range(j0, rb):
                p = x * b[t, j]
                e = ((ah * bh[j] - p) + ah * bl[j] + al * bh[j]) + al * bl[j]
                h0 = hi[i, j]
                s1 = h0 + p
                bb = s1 - h0
                err = (h0 - (s1 - bb)) + (p - bb)
                err += lo[i, j] + e
                h1 = s1 + err
                hi[i, j] = h1
                lo[i, j] = err - (h1 - s1)
    if symmetric:
        for i in range(ra):
            for j in range(i):
                hi[i, j] = hi[j, i]
                lo[i, j] = lo[j, i]


def outer_sum_dd(a, b, hi, lo, symmetric):
    _outer_sum_dd(np.ascontiguousarray(a), np.ascontiguousarray(b), hi, lo, symmetric)


@njit(cache=True)
def _cholesky_into(g, shift, l):
    """Cholesky of g + shift I into l (overwritten). Returns ok."""
    n = g.shape[0]
    for j in range(n):
        d = g[j, j] + shift
        for k in range(j):
            d -= l[j, k] * l[j, k]
        if not d > 0.0:
            l[:, :] = 0.0
            return False
        ljj = np.sqrt(d)
        l[j, j] = ljj
        for i in range(j + 1, n):
            s = g[i, j]
            for k in range(j):
                s -= l[i, k] * l[j, k]
            l[i, j] = s / ljj
        for i in range(j):
            l[i, j] = 0.0
    return True


@njit(cache=True)
def cholesky(a):
    l = np.zeros_like(a)
    ok = _cholesky_into(a, 0.0, l)
    return l, ok


@njit(cache=True)
def _whiten_into(l, m, out, tmp):
    """out = L^{-1} M L^{-T}: solve, transpose, solve, transpose back."""
    n = l.shape[0]
    out[:, :] = m
    _solve_lower_inplace(l, out)
    for i in range(n):
        for j in range(n):
            tmp[j, i] = out[i, j]
    _solve_lower_inplace(l, tmp)
    for i in range(n):
        for j in range(n):
            out[j, i] = tmp[i, j]


@njit(cache=True)
def _whiten(l, m):
    out = np.empty_like(m)
    _whiten_into(l, m, out, np.empty_like(m))
    return out


@njit(cache=True)
def _estimate_into(g, m, eps, jitter, v0, iters, gamma, l, a_w, tmp, v, av, w):
    # returns (sigma, jitter_used, ok); l and a_w receive the factor and A_hat
    r = g.shape[0]
    used = 0.0
    ok = _cholesky_into(g, eps, l)
    if not ok:
        ok = _cholesky_into(g, eps + jitter, l)
        used = jitter
    if not ok:
        a_w[:, :] = 0.0
        return 0.0, used, False
    _whiten_into(l, m, a_w, tmp)
    nonzero = False
    for i in range(r):
        for j in range(r):
            if a_w[i, j] != 0.0:
                nonzero = True
                break
        if nonzero:
            break
    sigma = _power_into(a_w, v0, iters, tmp, v, av, w) if nonzero else 0.0
    scale = gamma / max(sigma, 1.0)
    if scale != 1.0:
        for i in range(r):
            for j in range(r):
                a_w[i, j] *= scale
    return sigma, used, True


@njit(cache=True)
def estimate_fused(g, m, eps, jitter, v0, iters, gamma):
    """Cholesky with one jittered retry, whitened transition and its
    power-iteration normalization in a single call.

    Returns (l, a_hat, sigma, jitter_used, ok)."""
    r = g.shape[0]
    l = np.zeros_like(g)
    a_w = np.empty_like(g)
    sigma, used, ok = _estimate_into(g, m, eps, jitter, v0, iters, gamma, l, a_w,
                                     np.empty_like(g), np.empty(r), np.empty(r), np.empty(r))
    return l, a_w, sigma, used, ok


@njit(cache=True)
def _retrieve_into(l, a_hat, c_v, q, k, eta, w, u, y):
    r = l.shape[0]
    for i in range(r):
        s = q[i]
        for j in range(i):
            s -= l[i, j] * w[j]
        w[i] = s / l[i, i]
    for _ in range(k):
        for i in range(r):
            s = 0.0
            for j in range(r):
                s += a_hat[i, j] * w[j]
            u[i] = s
        for i in range(r):
            w[i] = u[i]
    # column-oriented back substitution keeps the access to L row-contiguous
    for i in range(r - 1, -1, -1):
        w[i] /= l[i, i]
        wi = w[i]
        for j in range(i):
            w[j] -= l[i, j] * wi
    for i in range(c_v.shape[0]):
        s = 0.0
        for j in range(r):
            s += c_v[i, j] * w[j]
        y[i] = eta * s


@njit(cache=True)
def retrieve_fused(l, a_hat, c_v, q, k, eta):
    """eta * C_v L^{-T} A_hat^K L^{-1} q, which equals eta * B_v L A_hat^K L^{-1} q."""
    r = l.shape[0]
    y = np.empty(c_v.shape[0], dtype=l.dtype)
    _retrieve_into(l, a_hat, c_v, q, k, eta, np.empty(r, dtype=l.dtype),
                   np.empty(r, dtype=l.dtype), y)
    return y


def workspace_size(r):
    """Length of the ``work`` buffer taken by ``decode_fused``."""
    return 3 * r * r + 6 * r


@njit(cache=True)
def decode_fused(buf, work, key, value, query, v0, fp):
    """One recurrent decode step on a packed state, free of heap allocation
    apart from the returned vector.

    ``buf`` holds G, M, C_v and the previous key back to back and is updated
    in place; ``fp`` packs (eps, jitter, gamma, eta, power_iters, K, max_norm).
    ``work`` receives L and A_hat in its first 2 r^2 entries, the rest is
    scratch. Returns (y, sigma, jitter_used, ok).
    """
    r = key.shape[0]
    p = value.shape[0]
    rr = r * r
    g = buf[:rr].reshape((r, r))
    m = buf[rr:2 * rr].reshape((r, r))
    c = buf[2 * rr:2 * rr + p * r].reshape((p, r))
    prev = buf[2 * rr + p * r:2 * rr + p * r + r]
    l = work[:rr].reshape((r, r))
    a_w = work[rr:2 * rr].reshape((r, r))
    tmp = work[2 * rr:3 * rr].reshape((r, r))
    o = 3 * rr
    z = work[o:o + r]
    q = work[o + r:o + 2 * r]
    v = work[o + 2 * r:o + 3 * r]
    av = work[o + 3 * r:o + 4 * r]
    w = work[o + 4 * r:o + 5 * r]
    u = work[o + 5 * r:o + 6 * r]
    norm = fp[6]
    for i in range(r):
        z[i] = key[i] / norm
        q[i] = query[i] / norm
    rank1_update(g, m, c, z, prev, value)
    prev[:] = z
    sigma, used, ok = _estimate_into(g, m, fp[0], fp[1], v0, int(fp[4]), fp[2],
                                     l, a_w, tmp, v, av, w)
    y = np.zeros(p)
    if ok:
        _retrieve_into(l, a_w, c, q, int(fp[5]), fp[3], w, u, y)
    return y, sigma, used, ok

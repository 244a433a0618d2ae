import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ska_recall.errors import NonSquare, NonSymmetric, NotPositiveDefinite, SingularDiagonal
from ska_recall.linalg import (ENV_FLAG, cholesky, implementations, power_iteration,
                               solve_lower, solve_upper, start_vector)


def spd(rng, n, cond=None):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if cond is None:
        lam = rng.uniform(0.1, 10.0, n)
    else:
        lam = np.geomspace(1.0, cond, n)
    return (q * lam) @ q.T


class TestCholesky:
    def test_identity(self):
        f = cholesky(np.eye(3), 1e-4)
        assert np.array_equal(f.l, np.eye(3))
        assert not f.jitter_applied

    def test_diagonal(self):
        f = cholesky(np.diag([4.0, 9.0]))
        np.testing.assert_array_equal(f.l, np.diag([2.0, 3.0]))

    def test_singular_psd_needs_jitter(self):
        f = cholesky(np.ones((2, 2)), 1e-4)
        assert f.jitter_applied
        rec = f.l @ f.l.T
        np.testing.assert_allclose(rec, [[1.0001, 1.0], [1.0, 1.0001]], rtol=0, atol=1e-12)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, -1.0]))

    def test_malformed(self):
        with pytest.raises(NonSquare):
            cholesky(np.ones((2, 3)))
        with pytest.raises(NonSymmetric):
            cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))

    @pytest.mark.parametrize("cond", [1e2, 1e5, 1e8])
    def test_reconstruction_and_triangularity(self, rng, cond):
        for n in (1, 5, 24, 48):
            a = spd(rng, n, cond)
            l = cholesky(a).l
            assert np.array_equal(np.triu(l, 1), np.zeros_like(l))
            assert np.all(np.diag(l) > 0)
            assert np.linalg.norm(l @ l.T - a) / np.linalg.norm(a) < 1e-10

    def test_factor_singular_values(self, rng):
        a = spd(rng, 12) + 1e-3 * np.eye(12)
        l = cholesky(a).l
        lam = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(np.linalg.norm(l, 2), np.sqrt(lam[-1]), rtol=1e-8)
        np.testing.assert_allclose(np.linalg.norm(np.linalg.inv(l), 2), 1 / np.sqrt(lam[0]), rtol=1e-8)


class TestSolves:
    def test_examples(self):
        np.testing.assert_array_equal(solve_lower(np.eye(2), np.array([[3.0], [4.0]])), [[3.0], [4.0]])
        np.testing.assert_array_equal(solve_lower(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]])),
                                      [[1.0], [2.0]])
        np.testing.assert_array_equal(solve_upper(np.eye(3), np.eye(3)), np.eye(3))
        np.testing.assert_array_equal(solve_upper(np.array([[5.0]]), np.array([[10.0]])), [[2.0]])

    def test_random_residual(self, rng):
        l = np.tril(rng.standard_normal((8, 8))) + 4 * np.eye(8)
        b = rng.standard_normal((8, 3))
        x = solve_lower(l, b)
        assert np.max(np.abs(l @ x - b)) < 1e-10
        x = solve_upper(l.T, b)
        assert np.max(np.abs(l.T @ x - b)) < 1e-10

    def test_two_solves_equal_spd_solve(self, rng):
        g = spd(rng, 10) + 1e-3 * np.eye(10)
        b = rng.standard_normal(10)
        l = cholesky(g).l
        x = solve_upper(l.T, solve_lower(l, b))
        np.testing.assert_allclose(x, np.linalg.inv(g) @ b, rtol=0, atol=1e-10)

    def test_singular_diagonal(self):
        with pytest.raises(SingularDiagonal):
            solve_lower(np.diag([1.0, 0.0]), np.ones(2))
        with pytest.raises(SingularDiagonal):
            solve_upper(np.diag([1e-301, 1.0]), np.ones(2))

    def test_vector_rhs_keeps_shape(self):
        assert solve_lower(np.eye(3), np.ones(3)).shape == (3,)


class TestPowerIteration:
    def test_zero(self):
        assert power_iteration(np.zeros((4, 4)), 6) == 0.0

    def test_diagonal(self):
        assert abs(power_iteration(np.diag([3.0, 1.0]), 6) - 3.0) < 1e-6

    def test_matches_svd(self):
        # 50 iterations resolve sigma_max to 1e-8 once the top singular gap is
        # wide enough; the estimate never exceeds sigma_max in any case
        checked = 0
        for seed in range(60):
            a = np.random.default_rng(seed).standard_normal((24, 24))
            s = np.linalg.svd(a, compute_uv=False)
            est = power_iteration(a, 50)
            assert est <= s[0] * (1 + 1e-14)
            if (s[1] / s[0]) ** 100 < 1e-6:
                assert abs(est - s[0]) / s[0] < 1e-8
                checked += 1
        assert checked >= 10

    def test_deterministic(self, rng):
        a = rng.standard_normal((6, 6))
        assert power_iteration(a, 6, seed=3) == power_iteration(a, 6, seed=3)
        np.testing.assert_array_equal(start_vector(7, 1), start_vector(7, 1))
        assert abs(np.linalg.norm(start_vector(7, 1)) - 1) < 1e-15

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**31 - 1))
    def test_monotone_and_below_frobenius(self, n, seed):
        r = np.random.default_rng(seed)
        x = r.standard_normal((n, n))
        a = x @ x.T
        prev = 0.0
        for k in range(1, 10):
            s = power_iteration(a, k, seed=seed)
            assert s >= prev * (1 - 1e-12)
            assert s <= np.linalg.norm(a) * (1 + 1e-12)
            prev = s


class TestBackends:
    def test_flag_name(self):
        assert ENV_FLAG == "SKA_RECALL_BACKEND"

    def test_numpy_always_available(self):
        assert "numpy" in implementations()

    def test_cholesky_agrees(self, kern, rng):
        a = spd(rng, 16)
        l, ok = kern.cholesky(a)
        assert ok
        np.testing.assert_allclose(l @ l.T, a, rtol=0, atol=1e-12)
        _, ok = kern.cholesky(-np.eye(3))
        assert not ok

    def test_estimate_and_retrieve_agree_across_backends(self, rng):
        impl = implementations()
        r, p = 12, 5
        x = rng.standard_normal((200, r)) / 4
        g, m = x.T @ x, x[1:].T @ x[:-1]
        c = rng.standard_normal((p, r))
        q = rng.standard_normal(r)
        v0 = start_vector(r, 0)
        outs = []
        for k in impl.values():
            l, a, sig, used, ok = k.estimate_fused(g, m, 1e-3, 1e-4, v0, 6, 1.2)
            outs.append((l, a, sig, k.retrieve_fused(l, a, c, q, 2, 1.5)))
        for got in outs[1:]:
            for u, w in zip(outs[0], got):
                np.testing.assert_allclose(u, w, rtol=1e-10, atol=1e-12)

    def test_outer_sum_dd_is_exact(self, kern, rng):
        # sum of 1 + tiny terms that plain float64 accumulation would lose
        a = np.vstack([np.ones((1, 2)), np.full((1000, 2), 1e-17)])
        hi, lo = np.zeros((2, 2)), np.zeros((2, 2))
        kern.outer_sum_dd(a, a, hi, lo, True)
        assert hi[0, 0] == 1.0
        np.testing.assert_allclose(lo[0, 0], 1000 * 1e-34, rtol=1e-10)

    def test_decode_matches_unfused(self, kern, rng):
        r, p = 6, 4
        rr = r * r
        buf = np.zeros(2 * rr + p * r + r)
        work = np.zeros(kern.workspace_size(r))
        g, m, c, prev = np.zeros((r, r)), np.zeros((r, r)), np.zeros((p, r)), np.zeros(r)
        fp = np.array([1e-3, 1e-4, 1.0, 1.5, 6, 2, 2.0])
        v0 = start_vector(r, 0)
        for _ in range(20):
            key, val, q = rng.standard_normal(r), rng.standard_normal(p), rng.standard_normal(r)
            y, sigma, used, ok = kern.decode_fused(buf, work, key, val, q, v0, fp)
            kern.rank1_update(g, m, c, key / 2.0, prev, val)
            prev = key / 2.0
            l, a, *_ = kern.estimate_fused(g, m, 1e-3, 1e-4, v0, 6, 1.0)
            np.testing.assert_array_equal(y, kern.retrieve_fused(l, a, c, q / 2.0, 2, 1.5))
        np.testing.assert_array_equal(buf[:rr].reshape(r, r), g)

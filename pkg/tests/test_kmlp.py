import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ska_recall.errors import DimensionMismatch
from ska_recall.kmlp import (C_SILU, KoopmanMLP, clamp_pairs, koopman_width, silu, silu_prime,
                             standard_mlp_params)
from ska_recall.theory.checks import finite_difference_jacobian

finite = st.floats(-1e3, 1e3, allow_nan=False)


def bank(d=8, dk=8, rho=1.0, theta=0.0, lift=None, read=None):
    lift = np.eye(dk, d) if lift is None else lift
    read = np.eye(d, dk) if read is None else read
    n = dk // 2
    return KoopmanMLP(lift, np.full(n, rho * math.cos(theta)), np.full(n, rho * math.sin(theta)), read)


def test_silu_constant():
    assert abs(C_SILU - 1.0998) < 1e-4
    x = np.linspace(-5, 5, 41)
    fd = (silu(x + 1e-6) - silu(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(silu_prime(x), fd, atol=1e-8)


@pytest.mark.parametrize("d,dk", [(64, 192), (512, 1408), (768, 2048), (1, 64)])
def test_width_formula(d, dk):
    assert koopman_width(d) == dk and koopman_width(d) % 64 == 0


def test_parameter_ratio():
    for d in (64, 256, 768):
        m = KoopmanMLP.init(d)
        assert m.param_count() == 2 * d * m.width
        assert 3 * m.param_count() == 2 * standard_mlp_params(d, m.width)


class TestForward:
    def test_zero_eigenvalues_pass_input(self):
        m = bank(rho=0.0)
        h = np.linspace(-1, 1, 8)
        assert np.array_equal(m.forward(h), h)
        assert not m.branch_jacobian(h).any()

    def test_identity_rotation(self):
        h = np.linspace(-2, 2, 8)
        np.testing.assert_allclose(bank().forward(h), h + silu(h), rtol=0, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_reference(self, seed):
        m = KoopmanMLP.init(16, seed=seed)
        h = np.random.default_rng(seed).standard_normal(16)
        a = m.w_lift @ h
        g = a / (1 + np.exp(-a))
        z = m.rotation() @ g
        np.testing.assert_allclose(m.forward(h), h + m.w_read @ z, rtol=0, atol=1e-12)

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            KoopmanMLP(np.zeros((3, 2)), np.zeros(1), np.zeros(1), np.zeros((2, 3)))
        with pytest.raises(DimensionMismatch):
            KoopmanMLP(np.zeros((4, 2)), np.zeros(2), np.zeros(2), np.zeros((3, 4)))
        with pytest.raises(DimensionMismatch):
            KoopmanMLP(np.zeros((4, 2)), np.zeros(3), np.zeros(3), np.zeros((2, 4)))

    def test_gated_variant(self):
        m = KoopmanMLP.init(8, seed=1, gated=True)
        plain = KoopmanMLP(m.w_lift, m.gammas, m.omegas, m.w_read)
        h = np.random.default_rng(1).standard_normal(8)
        gate = 1 / (1 + np.exp(-(m.w_gate @ h)))
        want = h + m.w_read @ (gate * (plain.rotation() @ silu(m.w_lift @ h)))
        np.testing.assert_allclose(m.forward(h), want, atol=1e-12)
        assert m.param_count() == plain.param_count() + m.w_gate.size


class TestRotation:
    def test_quarter_turn(self):
        r = bank(d=2, dk=2, theta=math.pi / 2).rotation()
        np.testing.assert_allclose(r, [[0, 1], [-1, 0]], atol=1e-16)
        np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-16)

    def test_unit_modulus(self):
        m = KoopmanMLP(np.eye(2), np.array([0.6]), np.array([0.8]), np.eye(2))
        np.testing.assert_allclose(m.rotation().T @ m.rotation(), np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_block_isotropy_and_norm(self, seed):
        m = KoopmanMLP.init(24, seed=seed)
        r = m.rotation()
        rho = np.hypot(m.gammas, m.omegas)
        for i, p in enumerate(rho):
            b = r[2 * i:2 * i + 2, 2 * i:2 * i + 2]
            np.testing.assert_allclose(b.T @ b, p * p * np.eye(2), atol=1e-12)
        assert abs(np.linalg.norm(r, 2) - rho.max()) <= 1e-12
        assert rho.max() <= 1 + 1e-15


class TestClamp:
    def test_examples(self):
        g, w = clamp_pairs([3.0, 0.1], [4.0, 0.2])
        np.testing.assert_allclose(g, [0.6, 0.1], rtol=1e-15)
        np.testing.assert_allclose(w, [0.8, 0.2], rtol=1e-15)

    def test_zero_pair(self):
        g, w = clamp_pairs([0.0], [0.0])
        assert g[0] == 0.0 and w[0] == 0.0

    @settings(max_examples=200)
    @given(finite, finite)
    def test_unit_disk_and_phase(self, g, w):
        cg, cw = clamp_pairs([g], [w])
        assert math.hypot(cg[0], cw[0]) <= 1 + 1e-15
        if math.hypot(g, w) > 1e-12:
            assert abs(math.atan2(cw[0], cg[0]) - math.atan2(w, g)) <= 1e-12

    def test_constructed_bank_is_clamped(self):
        m = KoopmanMLP(np.eye(4), np.array([3.0, 0.5]), np.array([4.0, 0.0]), np.eye(4))
        np.testing.assert_allclose(np.hypot(m.gammas, m.omegas), [1.0, 0.5], rtol=1e-15)


class TestJacobian:
    @pytest.mark.parametrize("gated", [False, True])
    @pytest.mark.parametrize("seed", range(4))
    def test_finite_differences(self, gated, seed):
        m = KoopmanMLP.init(12, seed=seed, gated=gated, width=32)
        h = np.random.default_rng(seed).standard_normal(12)
        j = m.jacobian(h)
        fd = finite_difference_jacobian(m.forward, h, 1e-6)
        assert np.linalg.norm(j - fd) <= 1e-6 * np.linalg.norm(j)

    @pytest.mark.parametrize("seed", range(10))
    def test_norm_bound(self, seed):
        m = KoopmanMLP.init(16, seed=seed)
        rng = np.random.default_rng(seed)
        for _ in range(5):
            h = 3 * rng.standard_normal(16)
            assert np.linalg.norm(m.branch_jacobian(h), 2) <= m.jacobian_bound() * (1 + 1e-12)

import math

import numpy as np
import pytest

from aammsu.schedules import (
    CoefficientConfig,
    Constant,
    Decreasing,
    FiniteHorizon,
    alpha_cap,
    beta_at,
    big_gamma_at,
    big_gamma_seq,
    c_over_mu_gamma_seq,
    c_sum,
    coefficients_at,
    eta_at,
    gamma_at,
    gamma_tilde_at,
    m_lower_bound,
    mu_at,
    omega_factor_at,
    r_upper_bound,
    var_changes_forward,
)
from aammsu.vectors import DomainError


def cfg_with(**kwargs):
    base = dict(d=4, M=0.75, mu=0.5, nu=0.5, gamma_tilde=0.75, beta2=0.999, epsilon=1e-8)
    base.update(kwargs)
    return CoefficientConfig(**base)


class TestValidation:
    def test_gamma_tilde_below_mu_rejected(self):
        with pytest.raises(DomainError, match="gamma_tilde >= mu"):
            cfg_with(mu=0.5, gamma_tilde=0.3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mu=0.0),
            dict(mu=1.0),
            dict(nu=0.0),
            dict(nu=1.0),
            dict(M=0.0),
            dict(beta2=1.0),
            dict(epsilon=0.0),
            dict(gamma_tilde=1.0),
        ],
    )
    def test_out_of_range_rejected(self, kwargs):
        with pytest.raises(DomainError):
            cfg_with(**kwargs)

    def test_b_must_bound_ratio(self):
        # (1 - 0.5)^2 / (1 - 0.5) = 0.5 > 0.25
        with pytest.raises(DomainError, match="B must bound"):
            cfg_with(mu=0.5, gamma_tilde=0.5, B=0.25)

    def test_b_default_admissible_whenever_gamma_tilde_geq_mu(self):
        for mu in np.linspace(0.1, 0.9, 9):
            for gt in np.linspace(mu, 0.99, 5):
                c = cfg_with(mu=mu, gamma_tilde=gt)
                assert (1 - c.gamma_tilde) ** 2 / (1 - c.mu) <= 1.0 + 1e-12


class TestPiecewiseCoefficients:
    def test_mu_first_is_one(self):
        assert mu_at(cfg_with(mu=0.5), 1) == 1.0

    def test_mu_tail(self):
        assert mu_at(cfg_with(mu=0.5), 2) == 0.5
        assert mu_at(cfg_with(mu=0.5), 1000) == 0.5

    def test_mu_index_error(self):
        with pytest.raises(IndexError):
            mu_at(cfg_with(), 0)

    def test_gamma_tilde_piecewise(self):
        assert gamma_tilde_at(cfg_with(gamma_tilde=0.75), 1) == 1.0
        assert gamma_tilde_at(cfg_with(gamma_tilde=0.75), 2) == 0.75
        assert gamma_tilde_at(cfg_with(mu=0.5, gamma_tilde=0.95), 7) == 0.95

    def test_beta_piecewise(self):
        assert beta_at(cfg_with(mu=0.5), 2) == 0.0
        assert beta_at(cfg_with(mu=0.5), 3) == 0.5
        assert beta_at(cfg_with(mu=0.3), 10) == pytest.approx((0.3 / 0.3) * (1 - 0.3), abs=0)

    def test_beta_index_error(self):
        with pytest.raises(IndexError):
            beta_at(cfg_with(), 1)

    def test_gamma_piecewise(self):
        assert gamma_at(cfg_with(), 2) == 0.0
        assert gamma_at(cfg_with(mu=0.5, gamma_tilde=0.75), 3) == pytest.approx(0.75 * 0.5 / 0.5)
        assert gamma_at(cfg_with(mu=0.5, gamma_tilde=0.5), 5) == pytest.approx(0.5)

    def test_beta_gamma_relation(self):
        # beta_n = mu_n gamma_n / gamma_tilde_n from n >= 3
        for mu in (0.1, 0.3, 0.5, 0.7, 0.9):
            for gt in (mu, (1 + mu) / 2, 0.95):
                cfg = cfg_with(mu=mu, gamma_tilde=max(mu, gt))
                for n in (3, 5, 17):
                    lhs = beta_at(cfg, n)
                    rhs = mu_at(cfg, n) * gamma_at(cfg, n) / gamma_tilde_at(cfg, n)
                    assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_coefficients_bundle(self):
        bundle = coefficients_at(cfg_with(mu=0.5), 3)
        assert bundle.beta_n == 0.5 and bundle.Gamma_n == 0.25
        first = coefficients_at(cfg_with(), 1)
        assert first.beta_n is None and first.mu_n == 1.0


class TestGammaProducts:
    def test_first_value(self):
        assert big_gamma_at(cfg_with(), 1) == 1.0

    def test_closed_form_examples(self):
        assert big_gamma_at(cfg_with(mu=0.5), 3) == 0.25
        assert big_gamma_at(cfg_with(mu=0.9, gamma_tilde=0.9), 2) == pytest.approx(0.1, rel=1e-15)

    def test_recursion_matches_closed_form(self):
        for mu in np.arange(0.1, 0.95, 0.1):
            cfg = cfg_with(mu=mu, gamma_tilde=max(mu, 0.9))
            seq = big_gamma_seq(cfg, 60)
            closed = (1 - mu) ** np.arange(60)
            assert np.allclose(seq, closed, rtol=1e-13)

    def test_gamma_identity(self):
        # Gamma_n * sum_{j<=n} mu_j / Gamma_j == 1
        for mu in np.arange(0.1, 0.95, 0.1):
            cfg = cfg_with(mu=mu, gamma_tilde=max(mu, 0.9))
            seq = big_gamma_seq(cfg, 60)
            mus = np.array([mu_at(cfg, j) for j in range(1, 61)])
            partial = np.cumsum(mus / seq)
            assert np.max(np.abs(seq * partial - 1.0)) < 1e-12

    def test_c_sum_examples(self):
        cfg = cfg_with(mu=0.5)
        assert c_sum(cfg, 1, 3) == 1.75  # 1 + 0.5 + 0.25
        assert c_sum(cfg, 1, 1) == 1.0
        assert c_sum(cfg, 2, 2) == 0.5

    def test_c_sum_index_error(self):
        with pytest.raises(IndexError):
            c_sum(cfg_with(), 3, 2)

    def test_c_sum_bounds(self):
        for mu in (0.1, 0.5, 0.9):
            cfg = cfg_with(mu=mu, gamma_tilde=max(mu, 0.9))
            ratios = c_over_mu_gamma_seq(cfg, 200)
            assert np.all(ratios <= 1.0 / mu**2 + 1e-12)
            seq = big_gamma_seq(cfg, 200)
            tails = np.cumsum(seq[::-1])[::-1]
            caps = (1 - mu) ** np.arange(200) / mu
            assert np.all(tails <= caps * (1 + 1e-12))


class TestEtaSchedules:
    def test_constant(self):
        cfg = cfg_with(eta=Constant(1e-3))
        assert eta_at(cfg, 1) == 1e-3 and eta_at(cfg, 10**6) == 1e-3

    def test_finite_horizon(self):
        assert eta_at(FiniteHorizon(1.0, 100), 5) == pytest.approx(0.1)

    def test_decreasing(self):
        assert eta_at(Decreasing(2.0), 4) == pytest.approx(1.0)

    def test_positive(self):
        with pytest.raises(DomainError):
            eta_at(Constant(0.0), 1)
        with pytest.raises(IndexError):
            eta_at(Constant(1.0), 0)


class TestBoundsAndCaps:
    def test_alpha_cap_m_equal_one(self):
        # the (M - 1)^2 term vanishes: cap = 1/(2 L M)
        assert alpha_cap(cfg_with(M=1.0, mu=0.5, B=1.0), 1.0) == pytest.approx(0.5)
        assert alpha_cap(cfg_with(M=1.0, mu=0.5, B=1.0), 2.0) == pytest.approx(0.25)

    def test_alpha_cap_general(self):
        # M = 2: 1/(2 (2 + (1/(2*0.25)) * 1/2)) = 1/(2*3) = 1/6
        assert alpha_cap(cfg_with(M=2.0, mu=0.5, B=1.0), 1.0) == pytest.approx(1.0 / 6.0)

    def test_alpha_cap_domain(self):
        with pytest.raises(DomainError):
            alpha_cap(cfg_with(), 0.0)

    def test_m_lower_bound_values(self):
        cfg = cfg_with(M=1.0, nu=0.5, epsilon=1e-8, eta=Constant(0.01))
        assert m_lower_bound(cfg, 1, 1.0) == pytest.approx(1.0 * 0.5 * 0.01 / (2 * (1 + 1e-8)))
        cfg2 = cfg_with(M=0.75, nu=0.5, epsilon=1e-8, eta=Constant(1e-3))
        assert m_lower_bound(cfg2, 1, 1.0) == pytest.approx(1.875e-4, rel=1e-6)

    def test_m_lower_bound_positive_and_linear_in_eta(self):
        cfg = cfg_with(eta=Constant(1e-9))
        assert m_lower_bound(cfg, 1, 1.0) > 0.0
        c1 = cfg_with(eta=Constant(1e-3))
        c2 = cfg_with(eta=Constant(2e-3))
        assert m_lower_bound(c2, 5, 1.0) == pytest.approx(2 * m_lower_bound(c1, 5, 1.0))

    def test_m_lower_bound_rejects_negative_k(self):
        with pytest.raises(DomainError):
            m_lower_bound(cfg_with(), 1, -1.0)

    def test_r_upper_bound_m_equal_one(self):
        cfg = cfg_with(d=2, M=1.0, nu=0.5, epsilon=0.5, eta=Constant(0.1))
        assert r_upper_bound(cfg, 1) == pytest.approx(2 * (0.5 / 0.5) ** 2 * 0.01)
        assert r_upper_bound(cfg, 1) == pytest.approx(0.02)

    def test_r_upper_bound_linear_in_d(self):
        r2 = r_upper_bound(cfg_with(d=2, eta=Constant(0.1)), 1)
        r8 = r_upper_bound(cfg_with(d=8, eta=Constant(0.1)), 1)
        assert r8 == pytest.approx(4 * r2)

    def test_dim_scaled_variant_shrinks_r(self):
        plain = r_upper_bound(cfg_with(d=4, M=1.0, eta=Constant(0.1)), 1)
        scaled = r_upper_bound(cfg_with(d=4, M=1.0, eta=Constant(0.1), dim_scaled_B=True), 1)
        assert scaled == plain  # M = 1 kills the B term entirely
        plain = r_upper_bound(cfg_with(d=4, M=2.0, eta=Constant(0.1)), 1)
        scaled = r_upper_bound(cfg_with(d=4, M=2.0, eta=Constant(0.1), dim_scaled_B=True), 1)
        assert scaled < plain


class TestVarChanges:
    def test_constant_stepsize_tau_is_beta(self):
        cfg = cfg_with(mu=0.5)
        r = np.array([0.2, 0.4, 0.8])
        tau, _, _ = var_changes_forward(cfg, r, r, 4)
        assert np.allclose(tau, beta_at(cfg, 4))
        assert np.allclose(tau, 1 - 0.5)

    def test_m_equal_one_n2_k_vanishes(self):
        cfg = cfg_with(M=1.0)
        r = np.array([0.3, 0.6])
        _, k, _ = var_changes_forward(cfg, r, r, 2)
        assert np.array_equal(k, np.zeros(2))

    def test_hand_evaluated(self, rng):
        cfg = cfg_with(M=0.8, mu=0.5, nu=0.4, gamma_tilde=0.6)
        r_prev = np.abs(rng.standard_normal(3)) + 0.1
        r_n = np.abs(rng.standard_normal(3)) + 0.1
        tau, k, alpha = var_changes_forward(cfg, r_prev, r_n, 4)
        beta = (0.5 / 0.5) * (1 - 0.5)
        omega = (0.8 - 1 / 0.5) * (0.4 * r_prev)
        assert np.allclose(alpha, 0.4 * r_n, rtol=1e-15)
        assert np.allclose(tau, beta * r_prev / r_n, rtol=1e-15)
        assert np.allclose(k, -0.5 * omega / r_n, rtol=1e-15)

    def test_rejects_nonpositive_stepsize(self):
        with pytest.raises(DomainError):
            var_changes_forward(cfg_with(), [0.1, 0.0], [0.1, 0.1], 3)

    def test_omega_factor(self):
        assert omega_factor_at(cfg_with(M=1.0), 2) == 0.0  # mu_1 = 1
        assert omega_factor_at(cfg_with(M=0.75, mu=0.5), 3) == pytest.approx(0.75 - 2.0)

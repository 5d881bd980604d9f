"""Hand-rolled special functions against scipy and quadrature oracles."""

import numpy as np
import pytest
from scipy import integrate, special

from tvreg._backend import kernels
from tvreg.errors import DomainError
from tvreg.varprior import DEFAULT_TRUNC, trunc_exp_mean, trunc_exp_mean_grad


class TestPolygamma:
    def test_digamma_against_scipy(self):
        x = np.geomspace(1e-3, 1e6, 400)
        np.testing.assert_allclose(kernels.digamma(x), special.digamma(x), rtol=1e-12, atol=1e-12)

    def test_trigamma_against_scipy(self):
        x = np.geomspace(1e-3, 1e6, 400)
        np.testing.assert_allclose(kernels.trigamma(x), special.polygamma(1, x), rtol=1e-10)

    def test_scalar_round_trip(self):
        assert isinstance(kernels.digamma(2.0), float)
        np.testing.assert_allclose(kernels.digamma(2.0), 1.0 - np.euler_gamma, rtol=1e-12)
        np.testing.assert_allclose(kernels.trigamma(2.0), np.pi**2 / 6 - 1.0, rtol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            kernels.digamma(0.0)
        with pytest.raises(DomainError):
            kernels.trigamma(-1.0)

    def test_digamma_is_derivative_of_gammaln(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(1.1, 50.0, size=20):
            h = 1e-6 * x
            fd = (special.gammaln(x + h) - special.gammaln(x - h)) / (2 * h)
            np.testing.assert_allclose(kernels.digamma(x), fd, rtol=1e-7)


def _trunc_quad_mean(kappa, c):
    norm = -np.expm1(-kappa * c)
    val, _ = integrate.quad(
        lambda a: a * kappa * np.exp(-kappa * (a + c)) / norm, -c, 0.0,
        epsabs=1e-15, epsrel=1e-13,
    )
    return val


class TestTruncExpMean:
    def test_small_rate_limit(self):
        c = DEFAULT_TRUNC
        np.testing.assert_allclose(trunc_exp_mean(1e-12, c), -c / 2.0, rtol=1e-10)
        np.testing.assert_allclose(-c / 2.0, -0.249995, rtol=1e-12)

    def test_quadrature_value(self):
        got = trunc_exp_mean(1.0, 0.5)
        np.testing.assert_allclose(got, _trunc_quad_mean(1.0, 0.5), rtol=1e-10)
        np.testing.assert_allclose(got, -0.2707470412683992, rtol=1e-12)

    def test_mass_concentrates_at_high_rate(self):
        got = trunc_exp_mean(100.0, 0.5)
        assert -0.49 <= got < -0.48

    def test_range_and_monotonicity(self):
        c = DEFAULT_TRUNC
        kappas = np.geomspace(1e-8, 1e4, 300)
        means = kernels.trunc_exp_mean(kappas, c)
        assert np.all(means > -c)
        assert np.all(means < 0.0)
        assert np.all(np.diff(means) < 0.0)

    def test_series_branch_continuity(self):
        # straddle the series/closed-form switch at kappa*c = 1e-3; any
        # branch mismatch would dwarf the true local slope (~ -c^2/12)
        c = DEFAULT_TRUNC
        below = trunc_exp_mean((1e-3 - 1e-9) / c, c)
        above = trunc_exp_mean((1e-3 + 1e-9) / c, c)
        assert abs(above - below) < 1e-9

    def test_plus_c_matches_at_moderate_rate(self):
        c = DEFAULT_TRUNC
        for k in (1e-6, 0.3, 2.0, 50.0):
            np.testing.assert_allclose(
                kernels.trunc_exp_mean_plus(k, c), trunc_exp_mean(k, c) + c, rtol=1e-9
            )

    def test_plus_c_stable_at_extreme_rate(self):
        c = DEFAULT_TRUNC
        np.testing.assert_allclose(kernels.trunc_exp_mean_plus(1e18, c), 1e-18, rtol=1e-10)


class TestTruncExpMeanGrad:
    def test_matches_central_differences(self):
        # step grows with kappa so the quotient stays above the closed
        # form's rounding noise across the sweep
        c = DEFAULT_TRUNC
        for kappa in np.geomspace(1e-2, 1e3, 40):
            h = 1e-4 * (1.0 + kappa)
            fd = (trunc_exp_mean(kappa + h, c) - trunc_exp_mean(kappa - h, c)) / (2 * h)
            np.testing.assert_allclose(trunc_exp_mean_grad(kappa, c), fd, rtol=1e-5, atol=1e-14)

    def test_oracle_value_at_unit_rate(self):
        # Frozen from the central-difference oracle at kappa=1, C=0.5.
        np.testing.assert_allclose(trunc_exp_mean_grad(1.0, 0.5), -0.0205754777, rtol=1e-8)

    def test_always_negative(self):
        c = DEFAULT_TRUNC
        kappas = np.geomspace(1e-9, 1e6, 200)
        assert np.all(kernels.trunc_exp_mean_grad(kappas, c) < 0.0)

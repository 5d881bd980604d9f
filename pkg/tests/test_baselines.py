"""Ridge/lasso baselines and the fixed time-series penalty."""

import numpy as np
import pytest

from tvreg.baselines import (
    BaselineConfig,
    collapse_time,
    fit_lasso,
    fit_ridge,
    fit_ridge_ts,
    kkt_residual,
)
from tvreg.errors import ConfigError, InputError
from tvreg.likelihoods import GaussianLikelihood, Instance, TimedDataset
from tvreg.varprior import GroupVariational, PriorConfig, grad_beta_prior, trunc_exp_mean
from util import random_gaussian_dataset, random_text_dataset


def single_instance_data(f=1.0, y=1.0):
    return TimedDataset([Instance(1, {0: f}, y, 0)], 1, 1, 0)


class TestBaselineConfig:
    def test_ts_params_required_iff_ts(self):
        with pytest.raises(ConfigError):
            BaselineConfig("ridge-ts")
        with pytest.raises(ConfigError):
            BaselineConfig("ridge-one", ts_alpha=-0.3, ts_lambda=1.0)
        BaselineConfig("ridge-ts", ts_alpha=-0.3, ts_lambda=1.0)

    def test_windows(self):
        assert BaselineConfig("ridge-one", 1.0).window_for(5) == (4, 4)
        assert BaselineConfig("lasso-all", 1.0).window_for(5) == (1, 4)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            BaselineConfig("ols")


class TestFitRidge:
    def test_scalar_example(self):
        sheet = fit_ridge(single_instance_data(), strength=1.0)
        np.testing.assert_allclose(sheet.values[0, 0], 0.5, atol=1e-10)

    def test_dominant_penalty(self):
        sheet = fit_ridge(single_instance_data(), strength=1e9)
        assert abs(sheet.values[0, 0]) < 1e-6

    def test_unpenalized_square_system(self):
        insts = [
            Instance(1, {0: 1.0, 1: 1.0}, 3.0, 0),
            Instance(1, {0: 1.0, 1: -1.0}, 1.0, 1),
        ]
        data = TimedDataset(insts, 1, 2, 0)
        sheet = fit_ridge(data, strength=0.0)
        np.testing.assert_allclose(sheet.values[:, 0], [2.0, 1.0], atol=1e-10)

    def test_lbfgs_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        data = random_gaussian_dataset(rng, 6, 3, n_per_t=15)
        closed = fit_ridge(data, strength=2.5, solver="closed")
        iterated = fit_ridge(data, strength=2.5, solver="lbfgs")
        np.testing.assert_allclose(iterated.values, closed.values, atol=1e-6)

    def test_empty_window(self):
        with pytest.raises(InputError):
            fit_ridge(TimedDataset([], 1, 1, 0), 1.0)

    def test_text_ridge_smoke(self):
        rng = np.random.default_rng(1)
        data = random_text_dataset(rng, 2, 2, vocab=4, n_per_t=6)
        sheet = fit_ridge(data, strength=1.0)
        assert sheet.values.shape == (2, 1, 4)
        assert np.all(np.isfinite(sheet.values))


class TestFitLasso:
    def test_zeroing_threshold(self):
        for s in (2.0, 5.0):
            sheet = fit_lasso(single_instance_data(), strength=s)
            assert sheet.values[0, 0] == 0.0

    def test_soft_threshold_value(self):
        sheet = fit_lasso(single_instance_data(), strength=1.0)
        np.testing.assert_allclose(sheet.values[0, 0], 0.5, atol=1e-5)

    def test_unpenalized_is_least_squares(self):
        sheet = fit_lasso(single_instance_data(), strength=0.0)
        np.testing.assert_allclose(sheet.values[0, 0], 1.0, atol=1e-5)

    def test_exact_zeros_and_kkt(self):
        rng = np.random.default_rng(2)
        data = random_gaussian_dataset(rng, 8, 2, n_per_t=20)
        sheet = fit_lasso(data, strength=12.0)
        beta = sheet.values[:, 0]
        assert np.any(beta == 0.0)
        flat = collapse_time(data)
        lik = GaussianLikelihood(flat)
        _, grad = lik.value_and_grad(beta[:, None])
        assert kkt_residual(-grad[:, 0], beta, 12.0) <= 1e-4

    def test_text_lasso_kkt(self):
        rng = np.random.default_rng(3)
        data = random_text_dataset(rng, 3, 2, vocab=4, n_per_t=8)
        sheet = fit_lasso(data, strength=3.0)
        from tvreg.likelihoods import SageLikelihood

        flat = collapse_time(data)
        _, grad = SageLikelihood(flat).value_and_grad(sheet.values)
        assert kkt_residual(-grad.ravel(), sheet.values.ravel(), 3.0) <= 1e-4


class TestFitRidgeTs:
    def test_zero_coupling_decouples_by_timestep(self):
        rng = np.random.default_rng(4)
        data = random_gaussian_dataset(rng, 3, 3, n_per_t=10)
        ts_lambda = 0.8
        sheet = fit_ridge_ts(data, 0.0, ts_lambda)
        for t in range(1, 4):
            per_t = fit_ridge(data.window(t, t), strength=1.0 / (2.0 * ts_lambda))
            np.testing.assert_allclose(sheet.values[:, t - 1], per_t.values[:, 0], atol=1e-5)

    def test_prior_only_shrinks_to_zero(self):
        data = TimedDataset([Instance(1, {0: 1.0}, 0.0, 0)], 3, 1, 0)
        sheet = fit_ridge_ts(data, -0.45, 0.5)
        assert np.max(np.abs(sheet.values)) < 1e-4

    def test_penalty_gradient_matches_pinned_adaptive_prior(self):
        # With E[alpha], E[1/lambda] pinned to (alpha0, 1/lambda0), the
        # adaptive prior's coefficient gradient is the ridge-ts penalty term.
        from scipy import optimize as sopt

        alpha0, lambda0 = -0.3, 2.0
        cfg = PriorConfig(tau=1.0, group_dim=4)
        kappa0 = sopt.brentq(lambda k: trunc_exp_mean(k, cfg.trunc) - alpha0, 1e-6, 500.0)
        a0 = 2.0
        b0 = lambda0 / (a0 - 1.0)  # E[1/lambda] = 1/lambda0
        g = GroupVariational(a0, b0, kappa0)
        rng = np.random.default_rng(5)
        beta = rng.normal(size=4)
        got = grad_beta_prior(beta, g, cfg)
        from util import dense_tridiag

        want = -(1.0 / lambda0) * (dense_tridiag(alpha0, 4) @ beta)
        np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_non_pd_coupling_rejected(self):
        data = random_gaussian_dataset(np.random.default_rng(6), 2, 10, n_per_t=2)
        with pytest.raises(ConfigError):
            fit_ridge_ts(data, -0.6, 1.0)
        with pytest.raises(ConfigError):
            fit_ridge_ts(data, -0.3, 0.0)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        data = random_gaussian_dataset(rng, 3, 3, n_per_t=5)
        s1 = fit_ridge_ts(data, -0.2, 1.0)
        s2 = fit_ridge_ts(data, -0.2, 1.0)
        np.testing.assert_array_equal(s1.values, s2.values)


class TestWindowEquivalence:
    def test_one_equals_all_on_single_year(self):
        rng = np.random.default_rng(8)
        data = random_gaussian_dataset(rng, 4, 1, n_per_t=25)
        one = fit_ridge(data, strength=2.0)
        all_ = fit_ridge(data, strength=2.0)
        np.testing.assert_array_equal(one.values, all_.values)

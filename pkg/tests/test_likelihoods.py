"""Task likelihoods, prediction, and the dataset container."""

import numpy as np
import pytest

from tvreg.errors import ConfigError, TaskMismatchError, ValidationError
from tvreg.likelihoods import (
    CoefficientSheet,
    GaussianLikelihood,
    Instance,
    SageLikelihood,
    TimedDataset,
    compute_theta,
    gaussian_loglik,
    mse,
    predict,
    sage_loglik,
    token_nll,
)
from util import random_gaussian_dataset, random_text_dataset, rel_err


def tiny_gaussian(instances, T=1, I=1):
    return TimedDataset(instances, T, I, 0)


class TestTimedDataset:
    def test_validation_timestep(self):
        with pytest.raises(ValidationError):
            TimedDataset([Instance(0, {0: 1.0}, 1.0, 0)], 3, 1, 0)
        with pytest.raises(ValidationError):
            TimedDataset([Instance(4, {0: 1.0}, 1.0, 0)], 3, 1, 0)

    def test_validation_feature_index(self):
        with pytest.raises(ValidationError):
            TimedDataset([Instance(1, {5: 1.0}, 1.0, 0)], 1, 2, 0)

    def test_validation_token_index(self):
        with pytest.raises(ValidationError):
            TimedDataset([Instance(1, {0: 1.0}, (7,), 0)], 1, 1, 4)

    def test_oov_token_allowed(self):
        data = TimedDataset([Instance(1, {0: 1.0}, (-1, 2), 0)], 1, 1, 4)
        assert data.is_text

    def test_window_reindexes_and_keeps_uids(self):
        insts = [Instance(t, {0: 1.0}, float(t), uid=t * 10) for t in range(1, 6)]
        data = TimedDataset(insts, 5, 1, 0)
        win = data.window(2, 4)
        assert win.n_timesteps == 3
        assert [i.t for i in win.instances] == [1, 2, 3]
        assert win.uids == {20, 30, 40}


class TestGaussianLoglik:
    def test_perfect_fit(self):
        insts = [Instance(1, {0: 2.0}, 6.0, 0), Instance(1, {0: -1.0}, -3.0, 1)]
        beta = CoefficientSheet(np.array([[3.0]]))
        value, grad = gaussian_loglik(beta, tiny_gaussian(insts))
        assert value == 0.0
        np.testing.assert_array_equal(grad.values, 0.0)

    def test_single_instance_example(self):
        insts = [Instance(1, {0: 1.0}, 2.0, 0)]
        beta = CoefficientSheet(np.zeros((1, 1)))
        value, grad = gaussian_loglik(beta, tiny_gaussian(insts))
        assert value == -4.0
        assert grad.values[0, 0] == 4.0

    def test_duplication_doubles(self):
        rng = np.random.default_rng(0)
        data = random_gaussian_dataset(rng, 3, 2, n_per_t=4)
        doubled = TimedDataset(
            data.instances + data.instances, 2, 3, 0
        )
        beta = CoefficientSheet(rng.normal(size=(3, 2)))
        v1, g1 = gaussian_loglik(beta, data)
        v2, g2 = gaussian_loglik(beta, doubled)
        np.testing.assert_allclose(v2, 2 * v1, rtol=1e-12)
        np.testing.assert_allclose(g2.values, 2 * g1.values, rtol=1e-12)

    def test_value_nonpositive(self):
        rng = np.random.default_rng(1)
        data = random_gaussian_dataset(rng, 4, 3)
        beta = CoefficientSheet(rng.normal(size=(4, 3)))
        value, _ = gaussian_loglik(beta, data)
        assert value <= 0.0

    def test_timestep_isolation(self):
        rng = np.random.default_rng(2)
        data = random_gaussian_dataset(rng, 3, 4, n_per_t=3)
        only_t2 = TimedDataset([i for i in data.instances if i.t == 2], 4, 3, 0)
        beta = CoefficientSheet(rng.normal(size=(3, 4)))
        _, grad = gaussian_loglik(beta, only_t2)
        mask = np.ones(4, dtype=bool)
        mask[1] = False
        np.testing.assert_array_equal(grad.values[:, mask], 0.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        data = random_gaussian_dataset(rng, 4, 3, n_per_t=6)
        lik = GaussianLikelihood(data)
        beta = rng.normal(size=(4, 3))
        _, grad = lik.value_and_grad(beta)
        h = 1e-6
        for i in range(4):
            for t in range(3):
                b1, b2 = beta.copy(), beta.copy()
                b1[i, t] += h
                b2[i, t] -= h
                fd = (lik.value_and_grad(b1)[0] - lik.value_and_grad(b2)[0]) / (2 * h)
                assert rel_err(grad[i, t], fd) < 1e-5

    def test_rejects_text(self):
        data = TimedDataset([Instance(1, {0: 1.0}, (0, 1), 0)], 1, 1, 2)
        with pytest.raises(TaskMismatchError):
            gaussian_loglik(CoefficientSheet(np.zeros((1, 1))), data)


class TestSageLoglik:
    def test_background_at_zero_deviation(self):
        rng = np.random.default_rng(4)
        data = random_text_dataset(rng, 2, 2, vocab=5)
        beta = CoefficientSheet(np.zeros((2, 2, 5)))
        value, _ = sage_loglik(beta, data)
        want = 0.0
        for inst in data.instances:
            logp = data.theta[inst.t - 1] - np.log(np.exp(data.theta[inst.t - 1]).sum())
            want += sum(logp[w] for w in inst.response)
        np.testing.assert_allclose(value, want, rtol=1e-10)

    def test_two_class_example(self):
        data = TimedDataset([Instance(1, {0: 1.0}, (0,), 0)], 1, 1, 2)
        data.theta = np.zeros((1, 2))
        beta = CoefficientSheet(np.array([[[1.0, 0.0]]]))
        value, _ = sage_loglik(beta, data)
        np.testing.assert_allclose(np.exp(value), np.e / (1 + np.e), rtol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        data = random_text_dataset(rng, 3, 2, vocab=4)
        beta = rng.normal(size=(3, 2, 4))
        v1, _ = sage_loglik(CoefficientSheet(beta), data)
        shifted = beta + 0.7  # constant across classes for every (feature, t)
        v2, _ = sage_loglik(CoefficientSheet(shifted), data)
        np.testing.assert_allclose(v1, v2, rtol=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        data = random_text_dataset(rng, 3, 2, vocab=4, n_per_t=5)
        lik = SageLikelihood(data)
        beta = rng.normal(size=(3, 2, 4)) * 0.5
        _, grad = lik.value_and_grad(beta)
        h = 1e-6
        worst = 0.0
        for idx in np.ndindex(beta.shape):
            b1, b2 = beta.copy(), beta.copy()
            b1[idx] += h
            b2[idx] -= h
            fd = (lik.value_and_grad(b1)[0] - lik.value_and_grad(b2)[0]) / (2 * h)
            worst = max(worst, rel_err(grad[idx], fd))
        assert worst < 1e-5

    def test_oov_tokens_skipped(self):
        d1 = TimedDataset([Instance(1, {0: 1.0}, (0, 1), 0)], 1, 1, 3)
        d2 = TimedDataset([Instance(1, {0: 1.0}, (0, -1, 1), 0)], 1, 1, 3)
        theta = np.log(np.full((1, 3), 1 / 3))
        beta = np.random.default_rng(7).normal(size=(1, 1, 3))
        v1, g1 = SageLikelihood(d1, theta).value_and_grad(beta)
        v2, g2 = SageLikelihood(d2, theta).value_and_grad(beta)
        np.testing.assert_allclose(v1, v2, rtol=1e-12)
        np.testing.assert_allclose(g1, g2, rtol=1e-12)

    def test_missing_theta_raises(self):
        data = TimedDataset([Instance(1, {0: 1.0}, (0,), 0)], 1, 1, 2)
        with pytest.raises(ConfigError):
            sage_loglik(CoefficientSheet(np.zeros((1, 1, 2))), data)


class TestComputeTheta:
    def test_smoothing_keeps_finite(self):
        data = TimedDataset([Instance(1, {0: 1.0}, (0,), 0)], 2, 1, 3)
        theta = compute_theta(data)
        assert np.all(np.isfinite(theta))
        assert theta.shape == (2, 3)
        # timestep 2 has no tokens: uniform background there
        np.testing.assert_allclose(theta[1], np.log(np.full(3, 1 / 3)), rtol=1e-12)

    def test_pooled_rows_identical(self):
        rng = np.random.default_rng(8)
        data = random_text_dataset(rng, 2, 3, vocab=5)
        pooled = compute_theta(data, pooled=True)
        assert np.all(pooled == pooled[0])


class TestPredict:
    def test_gaussian_zero_sheet(self):
        beta = CoefficientSheet(np.zeros((2, 3)))
        assert predict(beta, {0: 5.0, 1: -2.0}, "gaussian") == 0.0

    def test_gaussian_dot_product(self):
        beta = CoefficientSheet(np.array([[0.0, 1.0], [0.0, -1.0]]))
        assert predict(beta, {0: 2.0, 1: 3.0}, "gaussian") == -1.0

    def test_sage_background(self):
        beta = CoefficientSheet(np.zeros((1, 2, 3)))
        theta = np.log(np.array([0.2, 0.3, 0.5]))
        probs = predict(beta, {0: 1.0}, "sage", theta)
        np.testing.assert_allclose(probs, [0.2, 0.3, 0.5], rtol=1e-12)

    def test_sage_simplex(self):
        rng = np.random.default_rng(9)
        beta = CoefficientSheet(rng.normal(size=(2, 2, 6)))
        probs = predict(beta, {0: 0.5, 1: -1.0}, "sage", rng.normal(size=6))
        assert np.all(probs >= 0.0)
        np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-12)

    def test_sage_needs_theta(self):
        beta = CoefficientSheet(np.zeros((1, 1, 2)))
        with pytest.raises(ConfigError):
            predict(beta, {0: 1.0}, "sage")

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            predict(CoefficientSheet(np.zeros((1, 1))), {}, "poisson")


class TestMetrics:
    def test_mse(self):
        assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0

    def test_token_nll_skips_oov(self):
        probs = np.array([0.5, 0.5])
        np.testing.assert_allclose(token_nll(probs, (0, -1, 1)), -2 * np.log(0.5))

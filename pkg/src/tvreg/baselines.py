"""Comparison models: ridge and lasso variants plus the fixed-hyperparameter
time-series penalty.

``ridge-one`` / ``lasso-one`` train on the single year before the test year,
``ridge-all`` / ``lasso-all`` on every past year; both families fit one
time-insensitive coefficient per feature (the window is collapsed onto a
single timestep).  ``ridge-ts`` keeps per-timestep coefficient copies and
penalizes every trajectory with one shared tridiagonal quadratic form; it is
the special case of the adaptive prior with all groups pinned to the same
fixed (autocorrelation, scale) pair.

For the text task the background log-frequencies of the collapsed models are
pooled over their whole training window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from tvreg._backend import kernels
from tvreg.errors import ConfigError, InputError
from tvreg.likelihoods import (
    CoefficientSheet,
    GaussianLikelihood,
    Instance,
    SageLikelihood,
    TimedDataset,
    compute_theta,
)
from tvreg.optimizer import OptimizerConfig, maximize
from tvreg.tridiag import UniformTridiagonal, is_pd

KINDS = ("ridge-one", "ridge-all", "ridge-ts", "lasso-one", "lasso-all")

_BASE_OPT = OptimizerConfig(max_iter=1000, grad_tol=1e-8)

# Dense normal equations are cheaper than iterating below this many features.
_CLOSED_FORM_MAX_FEATURES = 200


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    strength: float = 0.0
    ts_alpha: float | None = None
    ts_lambda: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown baseline kind {self.kind!r}; expected one of {KINDS}")
        if self.strength < 0.0:
            raise ConfigError(f"penalty strength must be nonnegative, got {self.strength}")
        has_ts = self.ts_alpha is not None and self.ts_lambda is not None
        if (self.kind == "ridge-ts") != has_ts:
            raise ConfigError("ts_alpha and ts_lambda are required for ridge-ts and only for it")

    def window_for(self, test_t: int) -> tuple[int, int]:
        """Training window (inclusive, 1-based) for predicting timestep test_t."""
        if test_t < 2:
            raise ConfigError(f"no training data exists before timestep {test_t}")
        if self.kind.endswith("-one"):
            return (test_t - 1, test_t - 1)
        return (1, test_t - 1)


def collapse_time(data: TimedDataset) -> TimedDataset:
    """Drop the temporal dimension: every instance moves to timestep 1 and,
    for text data, the background log-frequencies are pooled over the whole
    window."""
    flat = [Instance(1, inst.features, inst.response, inst.uid) for inst in data.instances]
    out = TimedDataset(flat, 1, data.n_features, data.vocab_size, None, data.feature_names)
    if data.vocab_size > 0 and out.is_text:
        out.theta = compute_theta(out, pooled=True)
    return out


def _require_nonempty(data: TimedDataset):
    if not data.instances:
        raise InputError("training window is empty")


def _design(data: TimedDataset):
    from tvreg.likelihoods import _feature_matrix

    X = _feature_matrix(data.instances, data.n_features)
    y = np.array([float(inst.response) for inst in data.instances])
    return X, y


def _power_lipschitz(matvec, dim: int, iters: int = 60) -> float:
    v = np.full(dim, 1.0 / np.sqrt(dim))
    lam = 1.0
    for _ in range(iters):
        w = matvec(v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam


def fit_ridge(data: TimedDataset, strength: float, solver: str = "auto") -> CoefficientSheet:
    """Squared-error (or multinomial) loss plus ``strength`` times the squared
    L2 norm, over a collapsed window; returns a single-timestep sheet.

    ``solver="closed"`` forces the Gaussian normal-equations path,
    ``solver="lbfgs"`` the quasi-Newton path used for the text task and for
    wide feature sets.
    """
    _require_nonempty(data)
    flat = collapse_time(data)
    if solver not in ("auto", "closed", "lbfgs"):
        raise ConfigError(f"unknown ridge solver {solver!r}")

    if flat.is_text:
        if solver == "closed":
            raise ConfigError("the closed-form ridge solver only applies to the Gaussian task")
        lik = SageLikelihood(flat)
        shape = (flat.n_features, 1, flat.vocab_size)

        def objective(theta):
            vals = theta.reshape(shape)
            ll, g = lik.value_and_grad(vals)
            return ll - strength * float(theta @ theta), (g.ravel() - 2.0 * strength * theta)

        x, _ = maximize(objective, np.zeros(int(np.prod(shape))), _BASE_OPT)
        return CoefficientSheet(x.reshape(shape))

    X, y = _design(flat)
    if solver == "closed" or (solver == "auto" and flat.n_features <= _CLOSED_FORM_MAX_FEATURES):
        gram = (X.T @ X).toarray()
        rhs = X.T @ y
        if strength > 0.0:
            gram = gram + strength * np.eye(flat.n_features)
            beta = sla.solve(gram, rhs, assume_a="pos")
        else:
            beta = np.linalg.lstsq(X.toarray(), y, rcond=None)[0]
        return CoefficientSheet(beta[:, None])

    lik = GaussianLikelihood(flat)

    def objective(theta):
        ll, g = lik.value_and_grad(theta[:, None])
        return ll - strength * float(theta @ theta), g[:, 0] - 2.0 * strength * theta

    x, _ = maximize(objective, np.zeros(flat.n_features), _BASE_OPT)
    return CoefficientSheet(x[:, None])


def _soft_threshold(x, tau):
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def kkt_residual(loss_grad: np.ndarray, beta: np.ndarray, strength: float) -> float:
    """Worst violation of the lasso stationarity conditions: at zeros the
    loss gradient must stay within ``strength``, elsewhere it must cancel the
    subgradient exactly."""
    at_zero = beta == 0.0
    viol_zero = np.maximum(np.abs(loss_grad[at_zero]) - strength, 0.0)
    viol_rest = np.abs(loss_grad[~at_zero] + strength * np.sign(beta[~at_zero]))
    worst = 0.0
    if viol_zero.size:
        worst = float(viol_zero.max())
    if viol_rest.size:
        worst = max(worst, float(viol_rest.max()))
    return worst


def fit_lasso(
    data: TimedDataset,
    strength: float,
    max_iter: int = 20000,
    kkt_tol: float = 2e-6,
) -> CoefficientSheet:
    """L1-penalized fit by proximal gradient with exact soft-thresholding
    (produces exact zeros), over a collapsed window."""
    _require_nonempty(data)
    flat = collapse_time(data)

    if flat.is_text:
        lik = SageLikelihood(flat)
        shape = (flat.n_features, 1, flat.vocab_size)

        def loss_and_grad(theta):
            ll, g = lik.value_and_grad(theta.reshape(shape))
            return -ll, -g.ravel()

        from tvreg.likelihoods import _feature_matrix

        F = _feature_matrix(flat.instances, flat.n_features)
        m = np.array([sum(1 for w in inst.response if w != -1) for inst in flat.instances], dtype=np.float64)
        lip = 0.5 * _power_lipschitz(lambda v: F.T @ (m * (F @ v)), flat.n_features)
        dim = int(np.prod(shape))
    else:
        X, y = _design(flat)

        def loss_and_grad(theta):
            r = y - X @ theta
            return float(r @ r), -2.0 * (X.T @ r)

        lip = 2.0 * _power_lipschitz(lambda v: X.T @ (X @ v), flat.n_features)
        dim = flat.n_features
        shape = (flat.n_features, 1)

    step = 1.0 / (1.05 * max(lip, 1e-12))
    beta = np.zeros(dim)
    loss, grad = loss_and_grad(beta)
    for it in range(max_iter):
        while True:
            cand = _soft_threshold(beta - step * grad, step * strength)
            delta = cand - beta
            cand_loss, cand_grad = loss_and_grad(cand)
            quad = loss + float(grad @ delta) + float(delta @ delta) / (2.0 * step)
            if cand_loss <= quad + 1e-12 * max(1.0, abs(loss)):
                break
            step *= 0.5
        moved = float(np.max(np.abs(delta))) if delta.size else 0.0
        beta, loss, grad = cand, cand_loss, cand_grad
        if kkt_residual(grad, beta, strength) <= kkt_tol:
            break
        if moved == 0.0 and it > 0:
            break
    return CoefficientSheet(beta.reshape(shape))


def fit_ridge_ts(
    data: TimedDataset,
    ts_alpha: float,
    ts_lambda: float,
    opt: OptimizerConfig = _BASE_OPT,
) -> CoefficientSheet:
    """MAP fit under the fixed time-series penalty: every feature (and class)
    trajectory pays 1/(2*ts_lambda) times its quadratic form under the
    tridiagonal matrix A(ts_alpha).  Returns a full per-timestep sheet."""
    _require_nonempty(data)
    if ts_lambda <= 0.0:
        raise ConfigError(f"ts_lambda must be positive, got {ts_lambda}")
    if not is_pd(UniformTridiagonal(ts_alpha, data.n_timesteps)):
        raise ConfigError(
            f"ts_alpha={ts_alpha} is not positive definite for {data.n_timesteps} timesteps"
        )

    if data.is_text:
        lik = SageLikelihood(data)
        shape = (data.n_features, data.n_timesteps, data.vocab_size)
    else:
        lik = GaussianLikelihood(data)
        shape = (data.n_features, data.n_timesteps)

    alpha_arr = np.full(shape[0], ts_alpha)
    scale_arr = np.full(shape[0], 1.0 / ts_lambda)

    def objective(theta):
        vals = theta.reshape(shape)
        ll, g = lik.value_and_grad(vals)
        block = vals[:, None, :] if len(shape) == 2 else np.ascontiguousarray(vals.transpose(0, 2, 1))
        sumsq, cross = kernels.group_stats(block)
        penalty = 0.5 / ts_lambda * float(np.sum(sumsq + 2.0 * ts_alpha * cross))
        pg = kernels.prior_grad(block, alpha_arr, scale_arr)
        pg = pg[:, 0, :] if len(shape) == 2 else pg.transpose(0, 2, 1)
        return ll - penalty, (g + pg).ravel()

    x, _ = maximize(objective, np.zeros(int(np.prod(shape))), opt)
    return CoefficientSheet(x.reshape(shape))


def fit_baseline(cfg: BaselineConfig, window_data: TimedDataset) -> CoefficientSheet:
    """Dispatch a configured baseline onto its training window."""
    if cfg.kind == "ridge-ts":
        return fit_ridge_ts(window_data, cfg.ts_alpha, cfg.ts_lambda)
    if cfg.kind.startswith("ridge"):
        return fit_ridge(window_data, cfg.strength)
    return fit_lasso(window_data, cfg.strength)

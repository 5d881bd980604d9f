"""Fitting the adaptive sparse time-series model.

The trainable quantities are the coefficient sheet plus, per group, the two
free variational parameters, reparameterized for unconstrained quasi-Newton
ascent:

* ``u = log(a - 1 - a_margin)`` keeps the Gamma shape above 1 (finite
  inverse moment),
* ``v = log kappa`` keeps the truncated-exponential rate positive,
* the Gamma scale ``b`` is eliminated: it is refreshed to its closed-form
  stationary value inside every objective evaluation, so by the envelope
  argument the remaining partial derivatives are the total ones.

For the text task all class trajectories of a base feature share one group
by default; ``share_across_classes=False`` instead gives every
(feature, class) pair its own group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tvreg._backend import kernels
from tvreg.errors import ConfigError, InputError
from tvreg.likelihoods import (
    CoefficientSheet,
    GaussianLikelihood,
    SageLikelihood,
    TimedDataset,
)
from tvreg.optimizer import ConvergenceTrace, OptimizerConfig, maximize
from tvreg.varprior import (
    DEFAULT_TRUNC,
    PriorConfig,
    VariationalState,
    prior_value_and_grads,
)


@dataclass
class AdaptiveFit:
    sheet: CoefficientSheet
    state: VariationalState
    trace: ConvergenceTrace
    bound_value: float
    prior: PriorConfig
    theta: np.ndarray | None = None


def _to_block(values: np.ndarray, per_class_groups: bool) -> np.ndarray:
    """Reshape a sheet into the (G, K, T) block the group kernels expect."""
    if values.ndim == 2:
        return values[:, None, :]
    blk = np.ascontiguousarray(values.transpose(0, 2, 1))  # (I, V, T)
    if per_class_groups:
        n_feat, n_cls, n_t = blk.shape
        return blk.reshape(n_feat * n_cls, 1, n_t)
    return blk


def _from_block(block: np.ndarray, shape: tuple) -> np.ndarray:
    """Inverse of :func:`_to_block` for gradient blocks."""
    if len(shape) == 2:
        return block[:, 0, :]
    n_feat, n_t, n_cls = shape
    return block.reshape(n_feat, n_cls, n_t).transpose(0, 2, 1)


def make_objective(lik, shape: tuple, cfg: PriorConfig, per_class_groups: bool = False):
    """Build the joint bound objective over [sheet, u, v] with b eliminated.

    Returns ``(objective, n_groups)``; the objective maps the packed vector
    to (bound value, gradient).
    """
    n_sheet = int(np.prod(shape))
    n_t = shape[1]
    if len(shape) == 3 and not per_class_groups:
        n_groups = shape[0]
    elif len(shape) == 3:
        n_groups = shape[0] * shape[2]
    else:
        n_groups = shape[0]

    def objective(theta: np.ndarray):
        values = theta[:n_sheet].reshape(shape)
        u = theta[n_sheet : n_sheet + n_groups]
        v = theta[n_sheet + n_groups :]
        # Reject runaway probe points cleanly so the line search brackets
        # back into the finite region instead of chewing on NaNs; |u|,|v|=60
        # is far beyond any stationary point of the bound.
        if np.max(np.abs(u), initial=0.0) > 60.0 or np.max(np.abs(v), initial=0.0) > 60.0:
            return -np.inf, np.zeros_like(theta)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = 1.0 + cfg.a_margin + np.exp(u)
            kappa = np.exp(v)

            ll, ll_grad = lik.value_and_grad(values)
            block = _to_block(values, per_class_groups)
            sumsq, cross = kernels.group_stats(block)
            e_alpha = kernels.trunc_exp_mean(kappa, cfg.trunc)
            qbar = sumsq + 2.0 * e_alpha * cross
            b = np.maximum(qbar / ((a - 1.0) * cfg.group_dim), cfg.b_min)

            val, g_block, g_a, g_kappa = prior_value_and_grads(block, a, b, kappa, cfg)
            if not np.isfinite(val) or not np.isfinite(ll):
                return -np.inf, np.zeros_like(theta)
            grad = np.empty_like(theta)
            grad[:n_sheet] = (ll_grad + _from_block(g_block, shape)).ravel()
            grad[n_sheet : n_sheet + n_groups] = g_a * (a - 1.0 - cfg.a_margin)
            grad[n_sheet + n_groups :] = g_kappa * kappa
        return ll + val, grad

    return objective, n_groups


def _initial_sheet(data: TimedDataset, shape, init, init_strength) -> np.ndarray:
    if isinstance(init, np.ndarray):
        if init.shape != shape:
            raise InputError(f"initial sheet shape {init.shape} does not match {shape}")
        return init.astype(np.float64, copy=True)
    if init == "zero":
        return np.zeros(shape)
    if init == "lasso":
        from tvreg.baselines import fit_lasso

        last = data.window(data.n_timesteps, data.n_timesteps)
        slice_sheet = fit_lasso(last, init_strength)
        return np.repeat(slice_sheet.values, shape[1], axis=1)
    raise ConfigError(f"unknown initialization {init!r}")


def fit_adaptive(
    data: TimedDataset,
    tau: float,
    *,
    theta: np.ndarray | None = None,
    share_across_classes: bool = True,
    init="lasso",
    init_strength: float = 1.0,
    trunc: float = DEFAULT_TRUNC,
    b_min: float = 1e-8,
    a_margin: float = 1e-3,
    mode: str = "joint",
    block_rounds: int = 3,
    opt: OptimizerConfig = OptimizerConfig(max_iter=500),
) -> AdaptiveFit:
    """Fit the adaptive model on ``data`` (the full training window).

    ``mode="joint"`` optimizes coefficients and variational parameters as one
    vector; ``mode="blockwise"`` alternates between the coefficient block and
    the variational block as a fallback for ill-conditioned problems.
    """
    if not data.instances:
        raise InputError("cannot fit on an empty training window")
    if data.is_text:
        lik = SageLikelihood(data, theta)
        theta = lik.theta
        shape = (data.n_features, data.n_timesteps, data.vocab_size)
        per_class = not share_across_classes
    else:
        lik = GaussianLikelihood(data)
        shape = (data.n_features, data.n_timesteps)
        per_class = False

    k_per_group = 1 if (len(shape) == 2 or per_class) else shape[2]
    cfg = PriorConfig(
        tau=tau,
        group_dim=k_per_group * data.n_timesteps,
        trunc=trunc,
        b_min=b_min,
        a_margin=a_margin,
    )
    objective, n_groups = make_objective(lik, shape, cfg, per_class)

    sheet0 = _initial_sheet(data, shape, init, init_strength)
    n_sheet = sheet0.size
    x = np.concatenate(
        [sheet0.ravel(), np.full(n_groups, np.log(1.0 - a_margin)), np.zeros(n_groups)]
    )

    if mode == "joint":
        x, trace = maximize(objective, x, opt)
    elif mode == "blockwise":
        trace = ConvergenceTrace(message="blockwise")
        for _ in range(block_rounds):
            frozen = x.copy()

            def obj_sheet(xs, frozen=frozen):
                full = np.concatenate([xs, frozen[n_sheet:]])
                val, g = objective(full)
                return val, g[:n_sheet]

            xs, tr1 = maximize(obj_sheet, x[:n_sheet], opt)
            x = np.concatenate([xs, frozen[n_sheet:]])
            frozen = x.copy()

            def obj_var(xv, frozen=frozen):
                full = np.concatenate([frozen[:n_sheet], xv])
                val, g = objective(full)
                return val, g[n_sheet:]

            xv, tr2 = maximize(obj_var, x[n_sheet:], opt)
            x = np.concatenate([x[:n_sheet], xv])
            for tr in (tr1, tr2):
                trace.values.extend(tr.values)
                trace.grad_norms.extend(tr.grad_norms)
                trace.steps.extend(tr.steps)
                trace.line_search_failed |= tr.line_search_failed
            trace.converged = tr2.converged
    else:
        raise ConfigError(f"unknown optimization mode {mode!r}")

    values = x[:n_sheet].reshape(shape)
    a = 1.0 + a_margin + np.exp(x[n_sheet : n_sheet + n_groups])
    kappa = np.exp(x[n_sheet + n_groups :])
    block = _to_block(values, per_class)
    sumsq, cross = kernels.group_stats(block)
    e_alpha = kernels.trunc_exp_mean(kappa, trunc)
    qbar = sumsq + 2.0 * e_alpha * cross
    b = np.maximum(qbar / ((a - 1.0) * cfg.group_dim), b_min)

    return AdaptiveFit(
        sheet=CoefficientSheet(values),
        state=VariationalState(a=a, b=b, kappa=kappa, trunc=trunc),
        trace=trace,
        bound_value=float(objective(x)[0]),
        prior=cfg,
        theta=theta,
    )

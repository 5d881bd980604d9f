"""Sparse adaptive time-series priors for GLM coefficients.

Per-feature coefficient trajectories are tied across timesteps through a
tridiagonal-precision Gaussian whose scale and autocorrelation are
marginalized variationally, giving models that are sparse at the feature
level and adapt how much history each coefficient trusts.  The package ships
the variational fit, five ridge/lasso baselines, a synthetic generator
matching the generative story, and a rolling-origin forecasting harness with
a ``tvreg`` command line.
"""

from tvreg._backend import HAVE_COMPILED, backend_name
from tvreg.adaptive import AdaptiveFit, fit_adaptive
from tvreg.baselines import (
    BaselineConfig,
    fit_baseline,
    fit_lasso,
    fit_ridge,
    fit_ridge_ts,
)
from tvreg.harness import (
    FitReport,
    RunConfig,
    export_alpha_histogram,
    export_trajectories,
    rolling_eval,
    sparsity_report,
)
from tvreg.likelihoods import (
    CoefficientSheet,
    Instance,
    TimedDataset,
    compute_theta,
    gaussian_loglik,
    predict,
    sage_loglik,
)
from tvreg.optimizer import ConvergenceTrace, OptimizerConfig, grad_check, maximize
from tvreg.synthgen import FeatureTruth, GenSpec, generate
from tvreg.tridiag import UniformTridiagonal, cholesky_sample, is_pd, log_det, quadratic_form
from tvreg.varprior import (
    GroupVariational,
    PriorConfig,
    VariationalState,
    bound,
    gamma_moments,
    grad_a,
    grad_beta_prior,
    grad_kappa,
    solve_b,
    trunc_exp_mean,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveFit",
    "BaselineConfig",
    "CoefficientSheet",
    "ConvergenceTrace",
    "FeatureTruth",
    "FitReport",
    "GenSpec",
    "GroupVariational",
    "HAVE_COMPILED",
    "Instance",
    "OptimizerConfig",
    "PriorConfig",
    "RunConfig",
    "TimedDataset",
    "UniformTridiagonal",
    "VariationalState",
    "backend_name",
    "bound",
    "cholesky_sample",
    "compute_theta",
    "export_alpha_histogram",
    "export_trajectories",
    "fit_adaptive",
    "fit_baseline",
    "fit_lasso",
    "fit_ridge",
    "fit_ridge_ts",
    "gamma_moments",
    "gaussian_loglik",
    "generate",
    "grad_a",
    "grad_beta_prior",
    "grad_check",
    "grad_kappa",
    "is_pd",
    "log_det",
    "maximize",
    "predict",
    "quadratic_form",
    "rolling_eval",
    "sage_loglik",
    "solve_b",
    "sparsity_report",
    "trunc_exp_mean",
]

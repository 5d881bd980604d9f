"""Rolling-origin evaluation: tuning, forecasting, reports, and exports.

For every test timestep the chosen model is fitted on strictly earlier data
only; hyperparameters are tuned once, on the dev fold, which precedes every
test timestep.  Predictions always use the last trained timestep's
coefficients.  Every instance carries a provenance uid and each fit is
audited against the dev and test folds, so leakage is a hard error rather
than a silent bug.

The per-timestep metric is mean squared error for the Gaussian task and the
total negative log-likelihood for the text task; the overall row combines
test timesteps weighted by instance count (for NLL that is the plain sum).
"""

from __future__ import annotations

import fnmatch
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from tvreg.adaptive import fit_adaptive
from tvreg.baselines import (
    KINDS,
    collapse_time,
    fit_lasso,
    fit_ridge,
    fit_ridge_ts,
)
from tvreg.dataio import ingest, write_table
from tvreg.errors import ConfigError, DomainError, FeatureLookupError
from tvreg.likelihoods import CoefficientSheet, TimedDataset, compute_theta, mse, predict, token_nll
from tvreg.optimizer import OptimizerConfig

MODELS = ("adaptive",) + KINDS


@dataclass(frozen=True)
class RunConfig:
    task: str
    model: str
    dev_timestep: int
    test_timesteps: tuple
    data_path: str | None = None
    tau_grid: tuple = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
    strength_grid: tuple = (0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)
    ts_alpha_grid: tuple = (0.0, -0.15, -0.3, -0.45)
    ts_lambda_grid: tuple = (0.01, 0.1, 1.0, 10.0)
    max_iter: int = 800
    grad_tol: float = 1e-5
    memory: int = 10
    init: str = "lasso"
    init_strength: float = 1.0
    optim_mode: str = "blockwise"
    block_rounds: int = 2
    share_across_classes: bool = True
    sparsity_epsilon: float = 1e-3
    out_dir: str | None = None
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("test_timesteps", "tau_grid", "strength_grid", "ts_alpha_grid", "ts_lambda_grid"):
            d[key] = list(d[key])
        return d


@dataclass
class FitReport:
    task: str
    model: str
    seed: int
    metric_name: str
    selected: dict
    per_timestep: list
    overall_metric: float
    trunc: float
    e_alpha: list | None
    sparsity: dict
    traces: list
    audit: dict
    config: dict
    feature_names: tuple = ()
    sheet: CoefficientSheet | None = None
    theta_last: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "seed": self.seed,
            "metric_name": self.metric_name,
            "selected": self.selected,
            "per_timestep": self.per_timestep,
            "overall_metric": self.overall_metric,
            "trunc": self.trunc,
            "e_alpha": self.e_alpha,
            "sparsity": self.sparsity,
            "traces": self.traces,
            "audit": self.audit,
            "config": self.config,
            "feature_names": list(self.feature_names),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def worker_count() -> int:
    try:
        n = int(os.environ.get("TVREG_NUM_THREADS", "1"))
    except ValueError:
        return 1
    return max(n, 1)


def _map_maybe_parallel(fn, items):
    items = list(items)
    n = worker_count()
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _window_bounds(model: str, t_star: int) -> tuple[int, int]:
    if model.endswith("-one"):
        return (t_star - 1, t_star - 1)
    return (1, t_star - 1)


def _optimizer_cfg(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(memory=cfg.memory, max_iter=cfg.max_iter, grad_tol=cfg.grad_tol)


def _fit_window(cfg: RunConfig, data: TimedDataset, t_star: int, hyper):
    """Fit cfg.model on the window before t_star.  Returns (sheet,
    theta_last, trace_summary, extras, train_uids)."""
    lo, hi = _window_bounds(cfg.model, t_star)
    window = data.window(lo, hi)
    if not window.instances:
        raise ConfigError(f"no training instances in timesteps {lo}..{hi}")
    is_text = window.vocab_size > 0
    extras: dict = {}
    trace_summary = None
    theta_last = None

    if cfg.model == "adaptive":
        if is_text:
            window.theta = compute_theta(window)
        fit = fit_adaptive(
            window,
            tau=hyper,
            share_across_classes=cfg.share_across_classes,
            init=cfg.init,
            init_strength=cfg.init_strength,
            mode=cfg.optim_mode,
            block_rounds=cfg.block_rounds,
            opt=_optimizer_cfg(cfg),
        )
        sheet = fit.sheet
        theta_last = fit.theta[-1] if is_text else None
        trace_summary = fit.trace.summary()
        extras = {"state": fit.state, "bound": fit.bound_value}
    elif cfg.model == "ridge-ts":
        if is_text:
            window.theta = compute_theta(window)
        ts_alpha, ts_lambda = hyper
        sheet = fit_ridge_ts(window, ts_alpha, ts_lambda, _optimizer_cfg(cfg))
        theta_last = window.theta[-1] if is_text else None
    else:
        flat = collapse_time(window)
        if cfg.model.startswith("ridge"):
            sheet = fit_ridge(flat, hyper)
        else:
            sheet = fit_lasso(flat, hyper)
        theta_last = flat.theta[0] if is_text else None

    return sheet, theta_last, trace_summary, extras, window.uids


def _score_fold(sheet: CoefficientSheet, theta_last, fold, task: str) -> dict:
    if task == "gaussian":
        y = [float(inst.response) for inst in fold]
        yhat = [predict(sheet, inst.features, "gaussian") for inst in fold]
        return {"n_instances": len(fold), "metric": mse(y, yhat)}
    total = 0.0
    n_tokens = 0
    for inst in fold:
        probs = predict(sheet, inst.features, "sage", theta_last)
        total += token_nll(probs, inst.response)
        n_tokens += sum(1 for w in inst.response if w != -1)
    return {"n_instances": len(fold), "n_tokens": n_tokens, "metric": total}


def _candidates(cfg: RunConfig):
    if cfg.model == "adaptive":
        return [("tau", tau) for tau in cfg.tau_grid]
    if cfg.model == "ridge-ts":
        return [
            ("ts_alpha/ts_lambda", (a, l))
            for a in cfg.ts_alpha_grid
            for l in cfg.ts_lambda_grid
        ]
    return [("strength", s) for s in cfg.strength_grid]


def rolling_eval(cfg: RunConfig, data: TimedDataset | None = None) -> FitReport:
    """Run the tune-then-forecast protocol and assemble a reproducible report.

    ``data`` may be passed directly; otherwise ``cfg.data_path`` is ingested.
    """
    if cfg.model not in MODELS:
        raise ConfigError(f"unknown model {cfg.model!r}; expected one of {MODELS}")
    if data is None:
        if cfg.data_path is None:
            raise ConfigError("either a dataset or a data path is required")
        data = ingest(cfg.data_path)
    if cfg.task not in ("gaussian", "sage"):
        raise ConfigError(f"unknown task {cfg.task!r}")
    if (cfg.task == "sage") != (data.vocab_size > 0):
        raise ConfigError(f"task {cfg.task!r} does not match the dataset's response kind")

    tests = tuple(cfg.test_timesteps)
    if not tests or list(tests) != sorted(set(tests)):
        raise ConfigError("test timesteps must be a nonempty strictly increasing sequence")
    if cfg.dev_timestep >= tests[0]:
        raise ConfigError(
            f"dev timestep {cfg.dev_timestep} must precede all test timesteps {tests}"
        )
    if cfg.dev_timestep < 2:
        raise ConfigError("no training data exists before the dev timestep")
    if tests[-1] > data.n_timesteps:
        raise ConfigError(f"test timestep {tests[-1]} exceeds the data's {data.n_timesteps}")

    dev_fold = data.at_timestep(cfg.dev_timestep)
    if not dev_fold:
        raise ConfigError(f"dev timestep {cfg.dev_timestep} has no instances")

    def _uids_from(t_star: int) -> frozenset:
        """Provenance tags of every instance at or after t_star: nothing
        there may enter the training window of the fit scored at t_star."""
        return frozenset(
            inst.uid for inst in data.instances if inst.t >= t_star
        )

    overlap = 0

    def _tune_one(cand):
        _, hyper = cand
        sheet, theta_last, _, _, train_uids = _fit_window(cfg, data, cfg.dev_timestep, hyper)
        leaked = len(train_uids & _uids_from(cfg.dev_timestep))
        return _score_fold(sheet, theta_last, dev_fold, cfg.task)["metric"], leaked

    candidates = _candidates(cfg)
    tuning = _map_maybe_parallel(_tune_one, candidates)
    for _, bad in tuning:
        overlap += bad
    dev_metrics = [m for m, _ in tuning]
    best = int(np.argmin(dev_metrics))
    hyper_name, hyper = candidates[best]
    selected = {
        "hyperparameter": hyper_name,
        "value": list(hyper) if isinstance(hyper, tuple) else hyper,
        "dev_metric": dev_metrics[best],
    }

    per_timestep = []
    traces = []
    final = None
    for t_star in tests:
        sheet, theta_last, trace_summary, extras, train_uids = _fit_window(cfg, data, t_star, hyper)
        overlap += len(train_uids & _uids_from(t_star))
        fold = data.at_timestep(t_star)
        entry = {"t": t_star} | _score_fold(sheet, theta_last, fold, cfg.task)
        per_timestep.append(entry)
        if trace_summary is not None:
            traces.append({"t": t_star} | trace_summary)
        final = (sheet, theta_last, extras)

    if overlap:
        raise RuntimeError(f"provenance audit failed: {overlap} train/eval instances overlap")

    if cfg.task == "gaussian":
        total_n = sum(e["n_instances"] for e in per_timestep)
        overall = float(sum(e["metric"] * e["n_instances"] for e in per_timestep) / total_n)
        metric_name = "mse"
    else:
        overall = float(sum(e["metric"] for e in per_timestep))
        metric_name = "nll"

    sheet, theta_last, extras = final
    names = data.feature_names or tuple(f"x{i:03d}" for i in range(data.n_features))
    active, pruned, fraction = sparsity_report(sheet, cfg.sparsity_epsilon)
    trunc = extras["state"].trunc if "state" in extras else None
    e_alpha = None
    if "state" in extras:
        e_alpha = [float(v) for v in extras["state"].e_alpha]

    return FitReport(
        task=cfg.task,
        model=cfg.model,
        seed=cfg.seed,
        metric_name=metric_name,
        selected=selected,
        per_timestep=per_timestep,
        overall_metric=overall,
        trunc=trunc,
        e_alpha=e_alpha,
        sparsity={
            "epsilon": cfg.sparsity_epsilon,
            "n_active": len(active),
            "n_pruned": len(pruned),
            "pruned_fraction": fraction,
            "active": [names[i] for i in active],
            "pruned": [names[i] for i in pruned],
        },
        traces=traces,
        audit={"train_eval_overlap": overlap, "n_fits_audited": len(candidates) + len(tests)},
        config=cfg.to_dict(),
        feature_names=names,
        sheet=sheet,
        theta_last=theta_last,
    )


def sparsity_report(sheet, epsilon: float):
    """Group-level sparsity after thresholding: a feature is pruned iff the
    largest magnitude across its whole trajectory (all timesteps, all
    classes) stays below ``epsilon``.  Returns (active indices, pruned
    indices, pruned fraction)."""
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    values = sheet.values if isinstance(sheet, CoefficientSheet) else np.asarray(sheet)
    mags = np.max(np.abs(values), axis=tuple(range(1, values.ndim)))
    pruned = [int(i) for i in np.flatnonzero(mags < epsilon)]
    active = [int(i) for i in np.flatnonzero(mags >= epsilon)]
    return active, pruned, len(pruned) / values.shape[0]


def export_alpha_histogram(report: FitReport, bins: int = 20, path: str | None = None):
    """Histogram rows (bin_lo, bin_hi, count) of the per-feature expected
    autocorrelations of a fitted adaptive model."""
    if report.e_alpha is None:
        raise ConfigError("autocorrelation histogram needs a fitted adaptive model")
    values = np.asarray(report.e_alpha)
    edges = np.linspace(-report.trunc, 0.0, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    rows = [(edges[k], edges[k + 1], int(counts[k])) for k in range(bins)]
    if path is not None:
        write_table(path, ("bin_lo", "bin_hi", "count"), rows)
    return rows


def _select_features(selection, names) -> list[int]:
    if selection is None:
        return list(range(len(names)))
    tokens = selection.split(",") if isinstance(selection, str) else list(selection)
    index = {n: i for i, n in enumerate(names)}
    picked = []
    for token in tokens:
        if isinstance(token, int):
            if not 0 <= token < len(names):
                raise FeatureLookupError(f"feature index {token} out of range")
            picked.append(token)
            continue
        token = token.strip()
        if token in index:
            picked.append(index[token])
        elif token.isdigit():
            idx = int(token)
            if not 0 <= idx < len(names):
                raise FeatureLookupError(f"feature index {idx} out of range")
            picked.append(idx)
        else:
            matches = [i for n, i in index.items() if fnmatch.fnmatch(n, token)]
            if not matches:
                raise FeatureLookupError(f"unknown feature {token!r}")
            picked.extend(sorted(matches))
    seen = set()
    return [i for i in picked if not (i in seen or seen.add(i))]


def export_trajectories(sheet: CoefficientSheet, selection=None, feature_names=None, path: str | None = None):
    """Rows (feature, t[, word], value) for the selected features, suitable
    for external plotting.  Selection accepts names, integer indices, and
    glob patterns, comma-separated."""
    names = tuple(feature_names) if feature_names else tuple(f"x{i:03d}" for i in range(sheet.n_features))
    picked = _select_features(selection, names)
    rows = []
    if sheet.values.ndim == 2:
        cols = ("feature", "t", "value")
        for i in picked:
            for t in range(sheet.n_timesteps):
                rows.append((names[i], t + 1, float(sheet.values[i, t])))
    else:
        cols = ("feature", "t", "word", "value")
        for i in picked:
            for t in range(sheet.n_timesteps):
                for w in range(sheet.n_classes):
                    rows.append((names[i], t + 1, w, float(sheet.values[i, t, w])))
    if path is not None:
        write_table(path, cols, rows)
    return rows

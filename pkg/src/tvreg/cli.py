"""Command-line harness: generate / train / evaluate / export.

All outputs are plain structured-text tables plus a JSON run manifest
recording the configuration and seed.  Failures print a machine-readable
category to stderr and exit with the category's code (0 means success).
Set TVREG_NUM_THREADS to parallelize grid fits; set TVREG_DEBUG=1 to get
tracebacks instead of categorized errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from types import SimpleNamespace

import numpy as np

from tvreg import __version__
from tvreg._backend import backend_name
from tvreg.adaptive import fit_adaptive
from tvreg.baselines import collapse_time, fit_lasso, fit_ridge, fit_ridge_ts
from tvreg.dataio import (
    ingest,
    read_sheet,
    write_dataset,
    write_json,
    write_sheet,
    write_table,
    write_truth_table,
)
from tvreg.errors import EXIT_CODES, ConfigError, TvregError
from tvreg.harness import (
    MODELS,
    RunConfig,
    export_alpha_histogram,
    export_trajectories,
    rolling_eval,
    sparsity_report,
)
from tvreg.likelihoods import compute_theta
from tvreg.optimizer import OptimizerConfig
from tvreg.synthgen import GenSpec, generate


def _manifest(out_dir: str, command: str, config: dict, seed: int) -> None:
    write_json(
        os.path.join(out_dir, "manifest.json"),
        {
            "command": command,
            "config": config,
            "seed": seed,
            "package_version": __version__,
            "backend": backend_name(),
        },
    )


def _cmd_generate(args) -> int:
    spec = GenSpec.default(
        seed=args.seed,
        n_inactive=args.n_inactive,
        n_static=args.n_static,
        n_drifting=args.n_drifting,
        alpha_static=args.alpha_static,
        alpha_drifting=args.alpha_drifting,
        lam=args.lam,
        n_timesteps=args.n_timesteps,
        n_per_timestep=args.n_per_timestep,
        noise_sd=args.noise_sd,
        density=args.density,
    )
    data, _ = generate(spec)
    write_dataset(args.out, data)
    if args.truth:
        write_truth_table(args.truth, spec)
    print(f"wrote {len(data.instances)} instances to {args.out}")
    return 0


def _opt_cfg(args) -> OptimizerConfig:
    return OptimizerConfig(memory=args.memory, max_iter=args.max_iter, grad_tol=args.grad_tol)


def _cmd_train(args) -> int:
    data = ingest(args.data)
    train_end = args.train_end or data.n_timesteps
    if not 1 <= train_end <= data.n_timesteps:
        raise ConfigError(f"train end {train_end} outside 1..{data.n_timesteps}")
    lo = train_end if args.model.endswith("-one") else 1
    window = data.window(lo, train_end)
    is_text = window.vocab_size > 0

    os.makedirs(args.out_dir, exist_ok=True)
    if args.model == "adaptive":
        if is_text:
            window.theta = compute_theta(window)
        fit = fit_adaptive(
            window,
            tau=args.tau,
            share_across_classes=not args.per_class_groups,
            init=args.init,
            init_strength=args.init_strength,
            mode=args.optim_mode,
            block_rounds=args.block_rounds,
            opt=_opt_cfg(args),
        )
        sheet = fit.sheet
        state = fit.state
        e_alpha = state.e_alpha
        rows = [
            (data.feature_names[g] if data.feature_names and sheet.values.ndim == 2 else g,
             state.a[g], state.b[g], state.kappa[g], e_alpha[g])
            for g in range(len(state.a))
        ]
        write_table(
            os.path.join(args.out_dir, "variational.tsv"),
            ("group", "a", "b", "kappa", "e_alpha"),
            rows,
        )
        write_json(os.path.join(args.out_dir, "trace.json"), fit.trace.summary())
    elif args.model == "ridge-ts":
        if is_text:
            window.theta = compute_theta(window)
        sheet = fit_ridge_ts(window, args.ts_alpha, args.ts_lambda, _opt_cfg(args))
    elif args.model.startswith("ridge"):
        sheet = fit_ridge(collapse_time(window), args.strength)
    elif args.model.startswith("lasso"):
        sheet = fit_lasso(collapse_time(window), args.strength)
    else:
        raise ConfigError(f"unknown model {args.model!r}")

    write_sheet(os.path.join(args.out_dir, "sheet.tsv"), sheet, data.feature_names)
    _manifest(args.out_dir, "train", {k: v for k, v in vars(args).items() if k != "func"}, 0)
    print(f"fitted {args.model} on timesteps {lo}..{train_end}; outputs in {args.out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = RunConfig(
        task=args.task,
        model=args.model,
        dev_timestep=args.dev,
        test_timesteps=tuple(args.test),
        data_path=args.data,
        tau_grid=tuple(args.tau_grid),
        strength_grid=tuple(args.strength_grid),
        ts_alpha_grid=tuple(args.ts_alpha_grid),
        ts_lambda_grid=tuple(args.ts_lambda_grid),
        max_iter=args.max_iter,
        grad_tol=args.grad_tol,
        memory=args.memory,
        init=args.init,
        init_strength=args.init_strength,
        optim_mode=args.optim_mode,
        block_rounds=args.block_rounds,
        share_across_classes=not args.per_class_groups,
        sparsity_epsilon=args.sparsity_epsilon,
        out_dir=args.out_dir,
        seed=args.seed,
    )
    report = rolling_eval(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    cols = ("t", "n_instances", "metric") if cfg.task == "gaussian" else ("t", "n_instances", "n_tokens", "metric")
    write_table(
        os.path.join(args.out_dir, "per_timestep.tsv"),
        cols,
        [tuple(e[c] for c in cols) for e in report.per_timestep],
    )
    mags = np.max(np.abs(report.sheet.values), axis=tuple(range(1, report.sheet.values.ndim)))
    write_table(
        os.path.join(args.out_dir, "sparsity.tsv"),
        ("feature", "max_abs", "pruned"),
        [
            (report.feature_names[i], mags[i], int(report.feature_names[i] in report.sparsity["pruned"]))
            for i in range(len(report.feature_names))
        ],
    )
    if report.e_alpha is not None:
        export_alpha_histogram(report, bins=args.bins, path=os.path.join(args.out_dir, "alpha_hist.tsv"))
    write_sheet(os.path.join(args.out_dir, "sheet.tsv"), report.sheet, report.feature_names)
    _manifest(args.out_dir, "evaluate", cfg.to_dict(), cfg.seed)
    print(f"{cfg.model} overall {report.metric_name}: {report.overall_metric:.6f}; outputs in {args.out_dir}")
    return 0


def _cmd_export(args) -> int:
    if args.what == "alpha-hist":
        with open(args.report, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        shim = SimpleNamespace(e_alpha=payload.get("e_alpha"), trunc=payload.get("trunc"))
        export_alpha_histogram(shim, bins=args.bins, path=args.out)
    else:
        sheet, names = read_sheet(args.sheet)
        if args.what == "trajectories":
            export_trajectories(sheet, args.select, names, path=args.out)
        else:
            active, pruned, _ = sparsity_report(sheet, args.epsilon)
            mags = np.max(np.abs(sheet.values), axis=tuple(range(1, sheet.values.ndim)))
            pruned_set = set(pruned)
            write_table(
                args.out,
                ("feature", "max_abs", "pruned"),
                [(names[i], mags[i], int(i in pruned_set)) for i in range(len(names))],
            )
    print(f"wrote {args.what} table to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvreg", description=__doc__)
    p.add_argument("--version", action="version", version=f"tvreg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset drawn from the generative model")
    g.add_argument("--out", required=True)
    g.add_argument("--truth", help="also write the per-feature ground-truth table here")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-inactive", type=int, default=10)
    g.add_argument("--n-static", type=int, default=10)
    g.add_argument("--n-drifting", type=int, default=10)
    g.add_argument("--alpha-static", type=float, default=0.0)
    g.add_argument("--alpha-drifting", type=float, default=-0.45)
    g.add_argument("--lam", type=float, default=0.3)
    g.add_argument("--n-timesteps", type=int, default=10)
    g.add_argument("--n-per-timestep", type=int, default=200)
    g.add_argument("--noise-sd", type=float, default=0.5)
    g.add_argument("--density", type=float, default=0.3)
    g.set_defaults(func=_cmd_generate)

    def _fit_flags(sp):
        sp.add_argument("--max-iter", type=int, default=800)
        sp.add_argument("--grad-tol", type=float, default=1e-5)
        sp.add_argument("--memory", type=int, default=10)
        sp.add_argument("--init", choices=("lasso", "zero"), default="lasso")
        sp.add_argument("--init-strength", type=float, default=1.0)
        sp.add_argument("--optim-mode", choices=("joint", "blockwise"), default="blockwise")
        sp.add_argument("--block-rounds", type=int, default=2)
        sp.add_argument("--per-class-groups", action="store_true",
                        help="text task: one group per (feature, word) pair instead of sharing")

    t = sub.add_parser("train", help="fit one model on a training window")
    t.add_argument("--data", required=True)
    t.add_argument("--model", required=True, choices=MODELS)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--train-end", type=int, help="last training timestep (default: all)")
    t.add_argument("--tau", type=float, default=1.0)
    t.add_argument("--strength", type=float, default=1.0)
    t.add_argument("--ts-alpha", type=float, default=-0.3)
    t.add_argument("--ts-lambda", type=float, default=1.0)
    _fit_flags(t)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="rolling-origin tune/train/test protocol")
    e.add_argument("--data", required=True)
    e.add_argument("--task", required=True, choices=("gaussian", "sage"))
    e.add_argument("--model", required=True, choices=MODELS)
    e.add_argument("--dev", type=int, required=True)
    e.add_argument("--test", type=int, nargs="+", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--tau-grid", type=float, nargs="+", default=[1e-3, 1e-2, 1e-1, 1.0, 10.0])
    e.add_argument("--strength-grid", type=float, nargs="+", default=[0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0])
    e.add_argument("--ts-alpha-grid", type=float, nargs="+", default=[0.0, -0.15, -0.3, -0.45])
    e.add_argument("--ts-lambda-grid", type=float, nargs="+", default=[0.01, 0.1, 1.0, 10.0])
    e.add_argument("--sparsity-epsilon", type=float, default=1e-3)
    e.add_argument("--bins", type=int, default=20)
    _fit_flags(e)
    e.set_defaults(func=_cmd_evaluate)

    x = sub.add_parser("export", help="derive plotting tables from saved fits")
    x.add_argument("--what", required=True, choices=("trajectories", "alpha-hist", "sparsity"))
    x.add_argument("--out", required=True)
    x.add_argument("--sheet", help="sheet.tsv produced by train/evaluate")
    x.add_argument("--report", help="report.json produced by evaluate (alpha-hist)")
    x.add_argument("--select", help="features: names, indices, or glob patterns, comma-separated")
    x.add_argument("--epsilon", type=float, default=1e-3)
    x.add_argument("--bins", type=int, default=20)
    x.set_defaults(func=_cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "export":
        if args.what == "alpha-hist" and not args.report:
            print("error: config-error: --report is required for alpha-hist", file=sys.stderr)
            return EXIT_CODES["config-error"]
        if args.what in ("trajectories", "sparsity") and not args.sheet:
            print(f"error: config-error: --sheet is required for {args.what}", file=sys.stderr)
            return EXIT_CODES["config-error"]
    try:
        return args.func(args)
    except TvregError as exc:
        if os.environ.get("TVREG_DEBUG"):
            raise
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        if os.environ.get("TVREG_DEBUG"):
            raise
        print(f"error: internal-error: {exc}", file=sys.stderr)
        return EXIT_CODES["internal-error"]


if __name__ == "__main__":
    sys.exit(main())

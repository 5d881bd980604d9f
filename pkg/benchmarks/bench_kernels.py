#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the NumPy fallback.

Times the individual hot kernels and one full bound-plus-gradient objective
evaluation at a paper-like scale (many features) and at desk scale.  Run
from the repository root:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tvreg._backend import HAVE_COMPILED, get_backend


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(k, rng, n_groups, n_t):
    beta = rng.normal(size=(n_groups, 1, n_t))
    e_alpha = rng.uniform(-0.45, -0.05, size=n_groups)
    scale = rng.uniform(0.2, 4.0, size=n_groups)
    kappa = rng.uniform(0.1, 10.0, size=n_groups)
    a = 1.5 + rng.uniform(0.0, 3.0, size=n_groups)
    z = rng.normal(size=(64, n_t))
    v = rng.normal(size=n_t)
    c = 0.5 - 1e-5
    return {
        "group_stats": lambda: k.group_stats(beta),
        "group_logdet": lambda: k.group_logdet(e_alpha, n_t),
        "group_logdet_grad": lambda: k.group_logdet_grad(e_alpha, n_t),
        "prior_grad": lambda: k.prior_grad(beta, e_alpha, scale),
        "digamma": lambda: k.digamma(a),
        "trigamma": lambda: k.trigamma(a),
        "trunc_exp_mean": lambda: k.trunc_exp_mean(kappa, c),
        "trunc_exp_mean_grad": lambda: k.trunc_exp_mean_grad(kappa, c),
        "chol_sample_64": lambda: k.tridiag_chol_sample(-0.4, 1.0, z),
        "quadform": lambda: k.tridiag_quadform(-0.4, v),
    }


def objective_case(rng, n_features, n_t, n_per_t):
    from tvreg.adaptive import make_objective
    from tvreg.likelihoods import GaussianLikelihood, Instance, TimedDataset
    from tvreg.varprior import PriorConfig

    instances = []
    for t in range(1, n_t + 1):
        for n in range(n_per_t):
            feats = {int(i): 1.0 for i in np.flatnonzero(rng.random(n_features) < 0.2)}
            instances.append(Instance(t, feats, float(rng.normal()), 0))
    data = TimedDataset(instances, n_t, n_features, 0)
    lik = GaussianLikelihood(data)
    obj, n_groups = make_objective(lik, (n_features, n_t), PriorConfig(tau=1.0, group_dim=n_t))
    x = np.concatenate(
        [rng.normal(size=n_features * n_t) * 0.3, np.zeros(n_groups), np.zeros(n_groups)]
    )
    return lambda: obj(x)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--groups", type=int, default=2000)
    parser.add_argument("--timesteps", type=int, default=10)
    args = parser.parse_args()

    if not HAVE_COMPILED:
        print("compiled extension not available; showing the python backend alone")
    backends = [("python", get_backend("python"))]
    if HAVE_COMPILED:
        backends.append(("compiled", get_backend("compiled")))

    rng = np.random.default_rng(0)
    rows = {}
    for name, k in backends:
        for case, fn in kernel_cases(k, np.random.default_rng(1), args.groups, args.timesteps).items():
            rows.setdefault(case, {})[name] = timeit(fn, args.repeats)

    print(f"\nkernels, {args.groups} groups x {args.timesteps} timesteps "
          f"(best of {args.repeats}, microseconds):")
    header = f"{'kernel':<22}" + "".join(f"{n:>12}" for n, _ in backends)
    if HAVE_COMPILED:
        header += f"{'speedup':>10}"
    print(header)
    for case, vals in rows.items():
        line = f"{case:<22}" + "".join(f"{vals[n] * 1e6:12.1f}" for n, _ in backends)
        if HAVE_COMPILED:
            line += f"{vals['python'] / vals['compiled']:10.2f}x"
        print(line)

    print("\nfull objective evaluation (value + gradient), gaussian task:")
    for label, (nf, nt, npt) in {
        "desk scale  (I=30, T=10, N=200/t)": (30, 10, 200),
        "wide        (I=2000, T=10, N=100/t)": (2000, 10, 100),
    }.items():
        times = {}
        for name, _ in backends:
            import os
            import subprocess
            import sys

            # fresh interpreter so the backend env var is honored at import
            code = (
                "import numpy as np, time, os;"
                "from benchmarks.bench_kernels import objective_case, timeit;"
                f"fn = objective_case(np.random.default_rng(3), {nf}, {nt}, {npt});"
                "print(timeit(fn, 30))"
            )
            out = subprocess.run(
                [sys.executable, "-c", code],
                env={**os.environ, "TVREG_BACKEND": name, "PYTHONPATH": "."},
                capture_output=True, text=True, check=True,
            )
            times[name] = float(out.stdout.strip().splitlines()[-1])
        line = f"{label:<38}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n, _ in backends)
        if HAVE_COMPILED:
            line += f"{times['python'] / times['compiled']:10.2f}x"
        print(line)


if __name__ == "__main__":
    main()

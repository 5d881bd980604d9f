"""Shared brute-force oracles for the test suite.

Everything here is deliberately independent of the library's computation
paths: dense matrices, recursive cofactor expansion, quadrature, and finite
differences arbitrate the closed forms.
"""

from __future__ import annotations

import numpy as np


def dense_tridiag(alpha: float, n: int) -> np.ndarray:
    """Materialize the uniform symmetric tridiagonal matrix."""
    m = np.eye(n)
    for i in range(n - 1):
        m[i, i + 1] = m[i + 1, i] = alpha
    return m


def cofactor_det(m: np.ndarray) -> float:
    """Determinant by literal Laplace expansion along the first row."""
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * m[0, j] * cofactor_det(minor)
    return total


def rel_err(got, want, floor: float = 1.0) -> float:
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), floor)
    return float(np.max(np.abs(got - want) / denom))


def random_gaussian_dataset(rng, n_features, n_timesteps, n_per_t=5, density=0.7):
    from tvreg.likelihoods import Instance, TimedDataset

    instances = []
    uid = 0
    for t in range(1, n_timesteps + 1):
        for _ in range(n_per_t):
            feats = {
                i: float(rng.normal()) for i in range(n_features) if rng.random() < density
            }
            instances.append(Instance(t, feats, float(rng.normal()), uid))
            uid += 1
    return TimedDataset(instances, n_timesteps, n_features, 0)


def random_text_dataset(rng, n_features, n_timesteps, vocab, n_per_t=4, tokens_per_doc=6):
    from tvreg.likelihoods import Instance, TimedDataset, compute_theta

    instances = []
    uid = 0
    for t in range(1, n_timesteps + 1):
        for _ in range(n_per_t):
            feats = {
                i: float(rng.normal()) for i in range(n_features) if rng.random() < 0.8
            }
            toks = tuple(int(w) for w in rng.integers(0, vocab, size=tokens_per_doc))
            instances.append(Instance(t, feats, toks, uid))
            uid += 1
    data = TimedDataset(instances, n_timesteps, n_features, vocab)
    data.theta = compute_theta(data)
    return data

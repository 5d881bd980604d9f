"""Task log-likelihoods and prediction.

Two tasks are supported over the same timestamped sparse-feature data:

* Gaussian regression -- the objective is the negated sum of squared
  residuals, each instance scored against the coefficient copy of its own
  timestep (no variance normalization; any noise scale is absorbed by the
  prior's per-group scale).
* Multinomial text modeling -- each document's tokens are scored by a
  softmax over per-timestep background log-frequencies perturbed additively
  by feature-weighted deviation vectors; the log-normalizer is computed once
  per document, not per token.

Prediction always uses the coefficients of the last fitted timestep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from tvreg.errors import (
    ConfigError,
    DimensionError,
    TaskMismatchError,
    ValidationError,
)

OOV = -1  # token index marking an out-of-vocabulary item; skipped everywhere


@dataclass(frozen=True)
class Instance:
    """One observation: a 1-based timestep, a sparse feature map, and either
    a real response or a token-index sequence.  ``uid`` is the provenance
    tag used to audit train/test separation."""

    t: int
    features: dict
    response: object
    uid: int = -1

    @property
    def is_text(self) -> bool:
        return isinstance(self.response, (list, tuple, np.ndarray))


@dataclass
class TimedDataset:
    instances: list
    n_timesteps: int
    n_features: int
    vocab_size: int = 0
    theta: np.ndarray | None = None
    feature_names: tuple | None = None

    def __post_init__(self):
        if self.n_timesteps < 1 or self.n_features < 1:
            raise ValidationError(
                f"need at least one timestep and one feature, got T={self.n_timesteps}, I={self.n_features}"
            )
        if self.feature_names is not None and len(self.feature_names) != self.n_features:
            raise ValidationError(
                f"{len(self.feature_names)} feature names for {self.n_features} features"
            )
        for k, inst in enumerate(self.instances):
            if not 1 <= inst.t <= self.n_timesteps:
                raise ValidationError(
                    f"instance {k}: timestep {inst.t} outside 1..{self.n_timesteps}"
                )
            for i in inst.features:
                if not 0 <= i < self.n_features:
                    raise ValidationError(
                        f"instance {k}: feature index {i} outside 0..{self.n_features - 1}"
                    )
            if inst.is_text:
                for w in inst.response:
                    if w != OOV and not 0 <= w < self.vocab_size:
                        raise ValidationError(
                            f"instance {k}: token index {w} outside 0..{self.vocab_size - 1}"
                        )

    @property
    def is_text(self) -> bool:
        return bool(self.instances) and self.instances[0].is_text

    @property
    def uids(self):
        return frozenset(inst.uid for inst in self.instances)

    def at_timestep(self, t: int):
        return [inst for inst in self.instances if inst.t == t]

    def window(self, lo: int, hi: int) -> "TimedDataset":
        """Instances with lo <= t <= hi, timesteps reindexed to 1..hi-lo+1.
        Provenance uids are preserved."""
        if not 1 <= lo <= hi <= self.n_timesteps:
            raise ConfigError(f"window {lo}..{hi} outside 1..{self.n_timesteps}")
        shifted = [
            Instance(inst.t - lo + 1, inst.features, inst.response, inst.uid)
            for inst in self.instances
            if lo <= inst.t <= hi
        ]
        theta = self.theta[lo - 1 : hi] if self.theta is not None else None
        return TimedDataset(
            shifted, hi - lo + 1, self.n_features, self.vocab_size, theta, self.feature_names
        )


@dataclass
class CoefficientSheet:
    """Per-feature coefficient trajectories: (I, T) for regression, or
    (I, T, V) with a per-class axis for the text task."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (2, 3):
            raise DimensionError(f"coefficient sheet must be 2- or 3-dimensional, got {self.values.ndim}")

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return self.values.shape[2] if self.values.ndim == 3 else 0

    def last_slice(self) -> np.ndarray:
        return self.values[:, -1] if self.values.ndim == 2 else self.values[:, -1, :]


def _feature_matrix(instances, n_features) -> sparse.csr_matrix:
    indptr = [0]
    indices = []
    data = []
    for inst in instances:
        for i in sorted(inst.features):
            indices.append(i)
            data.append(float(inst.features[i]))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(instances), n_features),
    )


def compute_theta(data: TimedDataset, pooled: bool = False) -> np.ndarray:
    """Background log-frequencies of tokens, per timestep, with add-one
    smoothing so empty counts stay finite.  With ``pooled`` the counts are
    taken over the whole dataset and repeated for every timestep."""
    if data.vocab_size < 1:
        raise ConfigError("background log-frequencies need a positive vocabulary size")
    counts = np.zeros((data.n_timesteps, data.vocab_size))
    for inst in data.instances:
        if not inst.is_text:
            raise TaskMismatchError("background log-frequencies need token-sequence responses")
        for w in inst.response:
            if w != OOV:
                counts[inst.t - 1, w] += 1.0
    if pooled:
        counts = np.repeat(counts.sum(axis=0, keepdims=True), data.n_timesteps, axis=0)
    counts += 1.0
    return np.log(counts / counts.sum(axis=1, keepdims=True))


class GaussianLikelihood:
    """Negated sum of squared residuals, grouped by timestep for O(nnz)
    value/gradient evaluation.  Immutable after construction."""

    def __init__(self, data: TimedDataset):
        if data.is_text:
            raise TaskMismatchError("Gaussian likelihood needs real-valued responses")
        self.n_features = data.n_features
        self.n_timesteps = data.n_timesteps
        self._blocks = []
        for t in range(1, data.n_timesteps + 1):
            rows = data.at_timestep(t)
            if not rows:
                continue
            X = _feature_matrix(rows, data.n_features)
            y = np.array([float(inst.response) for inst in rows])
            self._blocks.append((t - 1, X, y))

    def value_and_grad(self, values: np.ndarray):
        if values.shape != (self.n_features, self.n_timesteps):
            raise DimensionError(
                f"sheet shape {values.shape} does not match ({self.n_features}, {self.n_timesteps})"
            )
        total = 0.0
        grad = np.zeros_like(values)
        for ti, X, y in self._blocks:
            r = y - X @ values[:, ti]
            total -= float(r @ r)
            grad[:, ti] = 2.0 * (X.T @ r)
        return total, grad


class SageLikelihood:
    """Multinomial log-likelihood of token sequences under additively
    perturbed background log-frequencies.  Immutable after construction."""

    def __init__(self, data: TimedDataset, theta: np.ndarray | None = None):
        if data.instances and not data.is_text:
            raise TaskMismatchError("text likelihood needs token-sequence responses")
        theta = data.theta if theta is None else theta
        if theta is None:
            raise ConfigError("text likelihood needs background log-frequencies (theta)")
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (data.n_timesteps, data.vocab_size):
            raise DimensionError(
                f"theta shape {theta.shape} does not match ({data.n_timesteps}, {data.vocab_size})"
            )
        self.n_features = data.n_features
        self.n_timesteps = data.n_timesteps
        self.vocab_size = data.vocab_size
        self.theta = theta
        self._blocks = []
        for t in range(1, data.n_timesteps + 1):
            docs = data.at_timestep(t)
            if not docs:
                continue
            F = _feature_matrix(docs, data.n_features)
            counts = np.zeros((len(docs), data.vocab_size))
            for d, inst in enumerate(docs):
                for w in inst.response:
                    if w != OOV:
                        counts[d, w] += 1.0
            self._blocks.append((t - 1, F, counts, counts.sum(axis=1)))

    def value_and_grad(self, values: np.ndarray):
        expected = (self.n_features, self.n_timesteps, self.vocab_size)
        if values.shape != expected:
            raise DimensionError(f"sheet shape {values.shape} does not match {expected}")
        total = 0.0
        grad = np.zeros_like(values)
        for ti, F, counts, m in self._blocks:
            eta = F @ values[:, ti, :] + self.theta[ti]
            peak = eta.max(axis=1)
            lse = peak + np.log(np.exp(eta - peak[:, None]).sum(axis=1))
            total += float((counts * eta).sum() - m @ lse)
            resid = counts - m[:, None] * np.exp(eta - lse[:, None])
            grad[:, ti, :] = F.T @ resid
        return total, grad


def gaussian_loglik(beta: CoefficientSheet, data: TimedDataset):
    """Value and gradient of the Gaussian task log-likelihood."""
    value, grad = GaussianLikelihood(data).value_and_grad(beta.values)
    return value, CoefficientSheet(grad)


def sage_loglik(beta: CoefficientSheet, data: TimedDataset):
    """Value and gradient of the text task log-likelihood."""
    value, grad = SageLikelihood(data).value_and_grad(beta.values)
    return value, CoefficientSheet(grad)


def predict(beta: CoefficientSheet, features: dict, mode: str, theta_last: np.ndarray | None = None):
    """Predict with the last-timestep coefficients: the linear response for
    ``mode="gaussian"``, or the full token probability vector for
    ``mode="sage"`` (which requires the last training timestep's background
    log-frequencies)."""
    last = beta.last_slice()
    if mode == "gaussian":
        if last.ndim != 1:
            raise DimensionError("gaussian prediction needs an (I, T) sheet")
        return float(sum(last[i] * x for i, x in features.items()))
    if mode == "sage":
        if last.ndim != 2:
            raise DimensionError("text prediction needs an (I, T, V) sheet")
        if theta_last is None:
            raise ConfigError("text prediction needs the last timestep's background log-frequencies")
        eta = np.asarray(theta_last, dtype=np.float64).copy()
        for i, x in features.items():
            eta += x * last[i]
        eta -= eta.max()
        p = np.exp(eta)
        return p / p.sum()
    raise ConfigError(f"unknown prediction mode {mode!r}")


def mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    return float(np.mean((y_true - y_pred) ** 2))


def token_nll(probs: np.ndarray, tokens) -> float:
    """Negative log-likelihood of a token sequence under a probability
    vector; out-of-vocabulary tokens are ignored."""
    return -float(sum(np.log(probs[w]) for w in tokens if w != OOV))

"""Exact O(T) kernels for the uniform symmetric tridiagonal matrix A(alpha, T).

A has ones on the diagonal and ``alpha`` on both off-diagonals and is never
materialized: quadratic forms, the log-determinant, positive-definiteness,
and Gaussian sampling with precision A/lambda all run in O(T) time from the
two stored scalars.

The eigenvalues of A are ``1 + 2*alpha*cos(k*pi/(T+1))`` for k = 1..T, which
gives the closed-form determinant and the O(1) definiteness test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tvreg._backend import kernels
from tvreg.errors import DimensionError, DomainError


@dataclass(frozen=True)
class UniformTridiagonal:
    """Uniform symmetric tridiagonal matrix: unit diagonal, ``alpha`` off it."""

    alpha: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"dim must be >= 1, got {self.dim}")


def quadratic_form(m: UniformTridiagonal, v) -> float:
    """v' A v, evaluated as sum(v_t^2) + 2*alpha*sum(v_t v_{t+1})."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != m.dim:
        raise DimensionError(f"vector of length {v.shape} does not match dim {m.dim}")
    return kernels.tridiag_quadform(m.alpha, v)


def log_det(m: UniformTridiagonal) -> float:
    """log det A via the eigenvalue product.

    Raises
    ------
    DomainError
        If A is not positive definite (some eigenvalue is nonpositive).
    """
    return kernels.tridiag_logdet(m.alpha, m.dim)


def min_eigenvalue(m: UniformTridiagonal) -> float:
    """Smallest eigenvalue, 1 - 2*|alpha|*cos(pi/(T+1))."""
    return 1.0 - 2.0 * abs(m.alpha) * math.cos(math.pi / (m.dim + 1))


def is_pd(m: UniformTridiagonal) -> bool:
    """True iff every eigenvalue of A is strictly positive (O(1) check)."""
    return min_eigenvalue(m) > 0.0


def cholesky_sample(m: UniformTridiagonal, lam: float, rng: np.random.Generator, size: int | None = None):
    """Draw from Normal(0, lam * A^-1) via the O(T) bidiagonal Cholesky factor.

    Parameters
    ----------
    lam : positive scale of the covariance (the precision matrix is A/lam).
    rng : NumPy random generator supplying the standard-normal draws.
    size : if given, return ``size`` independent draws as a (size, T) array.

    Raises
    ------
    DomainError
        If ``lam <= 0``.
    FactorizationError
        If the factorization breaks down (A not positive definite).
    """
    if lam <= 0.0:
        raise DomainError(f"lam must be positive, got {lam}")
    shape = (m.dim,) if size is None else (size, m.dim)
    z = rng.standard_normal(shape)
    return kernels.tridiag_chol_sample(m.alpha, lam, z)

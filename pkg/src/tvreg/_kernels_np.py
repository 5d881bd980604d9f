"""Pure-NumPy implementations of the hot numerical kernels.

This module and ``_kernels_c`` (the compiled extension) expose the same
surface; ``tvreg._backend`` picks one at import time.  Everything here is
deterministic and allocation-light: these functions sit inside the inner
loop of every objective evaluation.

Shapes: batched group operations take coefficient blocks of shape
``(G, K, T)`` -- G groups, K stacked trajectories per group, T timesteps.
"""

from __future__ import annotations

import numpy as np

from tvreg.errors import DomainError, FactorizationError

BACKEND = "python"

# Switch point between the shift recurrence and the asymptotic tail for the
# polygamma functions; series truncated at x**-10 / x**-11 keeps the error
# below 1e-13 for x >= 8.
_PG_CUTOFF = 8.0

# kappa*C below this uses the Bernoulli series for the truncated-exponential
# mean: the closed form loses ~|log10(z)| digits to cancellation.
_SMALL_Z = 1e-3


def _shift_up(x):
    """Return (x shifted above the cutoff, accumulated digamma correction,
    accumulated trigamma correction)."""
    x = np.array(x, dtype=np.float64, copy=True)
    dig = np.zeros_like(x)
    tri = np.zeros_like(x)
    while True:
        mask = x < _PG_CUTOFF
        if not mask.any():
            return x, dig, tri
        xm = x[mask]
        dig[mask] -= 1.0 / xm
        tri[mask] += 1.0 / (xm * xm)
        x[mask] = xm + 1.0


def digamma(x):
    """First derivative of log Gamma, by recurrence plus asymptotic series."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("digamma requires positive arguments")
    xs, corr, _ = _shift_up(arr)
    r = 1.0 / xs
    r2 = r * r
    tail = r2 * (1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 / 132.0))))
    out = corr + np.log(xs) - 0.5 * r - tail
    return out if out.ndim else float(out)


def trigamma(x):
    """Second derivative of log Gamma, same recurrence/series scheme."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("trigamma requires positive arguments")
    xs, _, corr = _shift_up(arr)
    r = 1.0 / xs
    r2 = r * r
    tail = r * (1.0 + r * (0.5 + r * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0))))))
    out = corr + tail
    return out if out.ndim else float(out)


def trunc_exp_mean(kappa, c):
    """Mean of the exponential distribution with rate ``kappa`` truncated to
    (-c, 0].  Series branch for small kappa*c avoids catastrophic
    cancellation in 1/kappa - c/(1 - exp(-kappa*c))."""
    k = np.asarray(kappa, dtype=np.float64)
    z = k * c
    small = z < _SMALL_Z
    zs = np.where(small, 1.0, z)  # keep the closed form off the tiny values
    closed = 1.0 / np.where(small, 1.0, k) - c / (-np.expm1(-zs))
    series = -c / 2.0 - c * z / 12.0 + c * z**3 / 720.0
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)


def trunc_exp_mean_plus(kappa, c):
    """E[alpha] + c, computed without the cancellation that adding c back
    onto :func:`trunc_exp_mean` suffers when the mean approaches -c.
    Identity: 1/kappa - c/expm1(kappa*c)."""
    k = np.asarray(kappa, dtype=np.float64)
    z = k * c
    small = z < _SMALL_Z
    ks = np.where(small, 1.0, k)
    with np.errstate(over="ignore"):
        closed = 1.0 / ks - c / np.expm1(np.where(small, 1.0, z))
    series = c / 2.0 - c * z / 12.0 + c * z**3 / 720.0
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)


def trunc_exp_mean_grad(kappa, c):
    """d/d kappa of :func:`trunc_exp_mean`."""
    k = np.asarray(kappa, dtype=np.float64)
    z = k * c
    small = z < _SMALL_Z
    ks = np.where(small, 1.0, k)
    w = -np.expm1(-ks * c)  # 1 - exp(-z), accurate
    closed = -1.0 / ks**2 + c * c * (1.0 - w) / (w * w)
    series = -c**2 / 12.0 + (c**4 / 240.0) * k**2 - (c**6 / 6048.0) * k**4
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)


def tridiag_quadform(alpha, v):
    """v' A v for the uniform symmetric tridiagonal A(alpha): the diagonal
    sum of squares plus twice alpha times the adjacent-pair sum."""
    v = np.asarray(v, dtype=np.float64)
    return float(v @ v + 2.0 * alpha * (v[:-1] @ v[1:]))


def tridiag_logdet(alpha, n):
    """log det A(alpha) via the eigenvalue product; requires A pd."""
    eig = 1.0 + 2.0 * alpha * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    if np.any(eig <= 0.0):
        raise DomainError(
            f"tridiagonal matrix with alpha={alpha}, dim={n} is not positive definite"
        )
    return float(np.log(eig).sum())


def tridiag_chol_sample(alpha, lam, z):
    """Transform standard-normal draws ``z`` (shape (T,) or (n, T)) into
    draws from Normal(0, lam * A(alpha)^-1) by back-substitution against the
    O(T) Cholesky factor of A."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[-1]
    d = np.empty(n)
    e = np.empty(max(n - 1, 0))
    d[0] = 1.0
    for t in range(n - 1):
        e[t] = alpha / d[t]
        rem = 1.0 - e[t] * e[t]
        if rem <= 0.0:
            raise FactorizationError(
                f"Cholesky breakdown at index {t + 1}: alpha={alpha} not positive definite for dim={n}"
            )
        d[t + 1] = np.sqrt(rem)
    w = np.empty_like(z)
    w[..., n - 1] = z[..., n - 1] / d[n - 1]
    for t in range(n - 2, -1, -1):
        w[..., t] = (z[..., t] - e[t] * w[..., t + 1]) / d[t]
    return np.sqrt(lam) * w


def group_stats(beta):
    """Per-group sum of squares and adjacent-timestep cross sum for a
    (G, K, T) coefficient block."""
    sumsq = np.einsum("gkt,gkt->g", beta, beta)
    cross = np.einsum("gkt,gkt->g", beta[:, :, :-1], beta[:, :, 1:])
    return sumsq, cross


def group_logdet(e_alpha, n):
    """log det A(e_alpha_g) for each group; e_alpha must keep A pd."""
    cosines = np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    return np.log1p(2.0 * np.outer(e_alpha, cosines)).sum(axis=1)


def group_logdet_grad(e_alpha, n):
    """d/d e_alpha of :func:`group_logdet` for each group."""
    cosines = np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    return (2.0 * cosines / (1.0 + 2.0 * np.outer(e_alpha, cosines))).sum(axis=1)


def prior_grad(beta, e_alpha, scale):
    """Gradient block -scale_g * (A(e_alpha_g) beta_g) for (G, K, T) beta."""
    nbr = np.zeros_like(beta)
    nbr[:, :, 1:] += beta[:, :, :-1]
    nbr[:, :, :-1] += beta[:, :, 1:]
    return -scale[:, None, None] * (beta + e_alpha[:, None, None] * nbr)

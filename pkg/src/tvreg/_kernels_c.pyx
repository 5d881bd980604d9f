# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled counterparts of ``tvreg._kernels_np``; same surface, C loops."""

import numpy as np

from libc.math cimport cos, expm1, log, log1p, sqrt

from tvreg.errors import DomainError, FactorizationError

BACKEND = "compiled"

cdef double PG_CUTOFF = 8.0
cdef double SMALL_Z = 1e-3
cdef double PI = 3.14159265358979323846264338327950288


cdef double _digamma(double x) noexcept nogil:
    cdef double out = 0.0
    cdef double r, r2
    while x < PG_CUTOFF:
        out -= 1.0 / x
        x += 1.0
    r = 1.0 / x
    r2 = r * r
    out += log(x) - 0.5 * r - r2 * (
        1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 / 132.0)))
    )
    return out


cdef double _trigamma(double x) noexcept nogil:
    cdef double out = 0.0
    cdef double r, r2
    while x < PG_CUTOFF:
        out += 1.0 / (x * x)
        x += 1.0
    r = 1.0 / x
    r2 = r * r
    out += r * (1.0 + r * (0.5 + r * (
        1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0)))
    )))
    return out


cdef double _trunc_mean(double kappa, double c) noexcept nogil:
    cdef double z = kappa * c
    cdef double w
    if z < SMALL_Z:
        return -c / 2.0 - c * z / 12.0 + c * z * z * z / 720.0
    w = -expm1(-z)
    return 1.0 / kappa - c / w


cdef double _trunc_mean_plus(double kappa, double c) noexcept nogil:
    # E[alpha] + c via 1/kappa - c/expm1(kappa*c); stable where the mean
    # approaches -c (large kappa) and, via the series, near kappa = 0.
    cdef double z = kappa * c
    cdef double g
    if z < SMALL_Z:
        return c / 2.0 - c * z / 12.0 + c * z * z * z / 720.0
    g = expm1(z)
    if g == g + 1.0:  # inf: exp overflowed, the correction term vanishes
        return 1.0 / kappa
    return 1.0 / kappa - c / g


cdef double _trunc_mean_grad(double kappa, double c) noexcept nogil:
    cdef double z = kappa * c
    cdef double w, c2, c4, c6, k2
    c2 = c * c
    if z < SMALL_Z:
        c4 = c2 * c2
        c6 = c4 * c2
        k2 = kappa * kappa
        return -c2 / 12.0 + (c4 / 240.0) * k2 - (c6 / 6048.0) * k2 * k2
    w = -expm1(-z)
    return -1.0 / (kappa * kappa) + c2 * (1.0 - w) / (w * w)


def _mapped(x, kernel):
    arr = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    kernel(flat, out)
    res = out.reshape(arr.shape)
    return res if res.ndim else float(res)


def _digamma_map(double[::1] src, double[::1] dst):
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _digamma(src[i])


def _trigamma_map(double[::1] src, double[::1] dst):
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _trigamma(src[i])


def digamma(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("digamma requires positive arguments")
    return _mapped(arr, _digamma_map)


def trigamma(x):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise DomainError("trigamma requires positive arguments")
    return _mapped(arr, _trigamma_map)


def trunc_exp_mean(kappa, double c):
    arr = np.asarray(kappa, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _trunc_mean(src[i], c)
    res = out.reshape(arr.shape)
    return res if res.ndim else float(res)


def trunc_exp_mean_plus(kappa, double c):
    arr = np.asarray(kappa, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _trunc_mean_plus(src[i], c)
    res = out.reshape(arr.shape)
    return res if res.ndim else float(res)


def trunc_exp_mean_grad(kappa, double c):
    arr = np.asarray(kappa, dtype=np.float64)
    flat = np.ascontiguousarray(arr.reshape(-1))
    out = np.empty_like(flat)
    cdef double[::1] src = flat
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    for i in range(src.shape[0]):
        dst[i] = _trunc_mean_grad(src[i], c)
    res = out.reshape(arr.shape)
    return res if res.ndim else float(res)


def tridiag_quadform(double alpha, v):
    cdef double[:] vv = np.asarray(v, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0]
    cdef Py_ssize_t t
    cdef double diag = 0.0, cross = 0.0
    for t in range(n):
        diag += vv[t] * vv[t]
    for t in range(n - 1):
        cross += vv[t] * vv[t + 1]
    return diag + 2.0 * alpha * cross


def tridiag_logdet(double alpha, Py_ssize_t n):
    cdef Py_ssize_t k
    cdef double total = 0.0, eig
    for k in range(1, n + 1):
        eig = 1.0 + 2.0 * alpha * cos(k * PI / (n + 1))
        if eig <= 0.0:
            raise DomainError(
                f"tridiagonal matrix with alpha={alpha}, dim={n} is not positive definite"
            )
        total += log(eig)
    return total


def tridiag_chol_sample(double alpha, double lam, z):
    arr = np.asarray(z, dtype=np.float64)
    squeeze = arr.ndim == 1
    work = np.ascontiguousarray(np.atleast_2d(arr))
    out = np.empty_like(work)
    cdef double[:, ::1] zz = work
    cdef double[:, ::1] ww = out
    cdef Py_ssize_t n = zz.shape[1]
    cdef Py_ssize_t rows = zz.shape[0]
    d_arr = np.empty(n)
    e_arr = np.empty(max(n - 1, 1))
    cdef double[::1] d = d_arr
    cdef double[::1] e = e_arr
    cdef Py_ssize_t t, i
    cdef double rem, root
    d[0] = 1.0
    for t in range(n - 1):
        e[t] = alpha / d[t]
        rem = 1.0 - e[t] * e[t]
        if rem <= 0.0:
            raise FactorizationError(
                f"Cholesky breakdown at index {t + 1}: alpha={alpha} not positive definite for dim={n}"
            )
        d[t + 1] = sqrt(rem)
    root = sqrt(lam)
    for i in range(rows):
        ww[i, n - 1] = zz[i, n - 1] / d[n - 1]
        for t in range(n - 2, -1, -1):
            ww[i, t] = (zz[i, t] - e[t] * ww[i, t + 1]) / d[t]
        for t in range(n):
            ww[i, t] = root * ww[i, t]
    return out[0] if squeeze else out


def group_stats(beta):
    cdef double[:, :, :] b = np.asarray(beta, dtype=np.float64)
    cdef Py_ssize_t G = b.shape[0], K = b.shape[1], T = b.shape[2]
    sumsq_arr = np.zeros(G)
    cross_arr = np.zeros(G)
    cdef double[::1] sumsq = sumsq_arr
    cdef double[::1] cross = cross_arr
    cdef Py_ssize_t g, k, t
    cdef double s, c
    for g in range(G):
        s = 0.0
        c = 0.0
        for k in range(K):
            for t in range(T):
                s += b[g, k, t] * b[g, k, t]
            for t in range(T - 1):
                c += b[g, k, t] * b[g, k, t + 1]
        sumsq[g] = s
        cross[g] = c
    return sumsq_arr, cross_arr


def group_logdet(e_alpha, Py_ssize_t n):
    cdef double[::1] ea = np.ascontiguousarray(e_alpha, dtype=np.float64)
    cdef Py_ssize_t G = ea.shape[0]
    cos_arr = np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    out_arr = np.zeros(G)
    cdef double[::1] cs = cos_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t g, t
    cdef double acc
    for g in range(G):
        acc = 0.0
        for t in range(n):
            acc += log1p(2.0 * ea[g] * cs[t])
        out[g] = acc
    return out_arr


def group_logdet_grad(e_alpha, Py_ssize_t n):
    cdef double[::1] ea = np.ascontiguousarray(e_alpha, dtype=np.float64)
    cdef Py_ssize_t G = ea.shape[0]
    cos_arr = np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    out_arr = np.zeros(G)
    cdef double[::1] cs = cos_arr
    cdef double[::1] out = out_arr
    cdef Py_ssize_t g, t
    cdef double acc
    for g in range(G):
        acc = 0.0
        for t in range(n):
            acc += 2.0 * cs[t] / (1.0 + 2.0 * ea[g] * cs[t])
        out[g] = acc
    return out_arr


def prior_grad(beta, e_alpha, scale):
    cdef double[:, :, :] b = np.asarray(beta, dtype=np.float64)
    cdef double[::1] ea = np.ascontiguousarray(e_alpha, dtype=np.float64)
    cdef double[::1] sc = np.ascontiguousarray(scale, dtype=np.float64)
    cdef Py_ssize_t G = b.shape[0], K = b.shape[1], T = b.shape[2]
    out_arr = np.empty((G, K, T))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t g, k, t
    cdef double nbr
    for g in range(G):
        for k in range(K):
            for t in range(T):
                nbr = 0.0
                if t > 0:
                    nbr += b[g, k, t - 1]
                if t + 1 < T:
                    nbr += b[g, k, t + 1]
                out[g, k, t] = -sc[g] * (b[g, k, t] + ea[g] * nbr)
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled kernel implementations.

Mirrors ``_pykernels`` one for one; see that module for the math notes. The
hot path is the constrained likelihood fit, which evaluates the incomplete
beta tails thousands of times per Monte-Carlo replication.
"""

from libc.math cimport log, pow, INFINITY

import numpy as np

NAME = "cython"


cdef double _tail(double x, Py_ssize_t h, Py_ssize_t H) noexcept nogil:
    # I_x(h, H-h+1) = sum_{t=h}^{H} C(H,t) x^t (1-x)^(H-t)
    cdef double comb = 1.0
    cdef double s = 0.0
    cdef Py_ssize_t t
    for t in range(h):
        comb = comb * (H - t) / (t + 1)
    for t in range(h, H + 1):
        s += comb * pow(x, t) * pow(1.0 - x, H - t)
        comb = comb * (H - t) / (t + 1)
    return s


def betatail(double x, long h, long m):
    """Regularized incomplete beta I_x(h, m) for positive integer h, m."""
    return _tail(x, h, h + m - 1)


def order_stat_pmf(long h, long H, const double[::1] cumulative):
    """Category pmf of the h-th order statistic of H parent draws."""
    cdef Py_ssize_t Q = cumulative.shape[0]
    out = np.empty(Q)
    cdef double[::1] vout = out
    cdef double b_prev = 0.0
    cdef double b
    cdef Py_ssize_t q
    for q in range(Q):
        b = _tail(cumulative[q], h, H)
        vout[q] = b - b_prev
        b_prev = b
    return out


def loglik_from_counts(const double[:, ::1] counts, const double[::1] c):
    """Rank-conditional log-likelihood from per-(stratum, category) counts."""
    cdef Py_ssize_t H = counts.shape[0]
    cdef Py_ssize_t Q = counts.shape[1]
    cdef Py_ssize_t h, q
    cdef double ll = 0.0
    cdef double b, b_prev, p, psum
    cdef double rowsum
    if Q == 1:
        return 0.0
    for h in range(1, H + 1):
        rowsum = 0
        for q in range(Q):
            rowsum += counts[h - 1, q]
        if rowsum == 0:
            continue
        b_prev = 0.0
        psum = 0.0
        for q in range(Q - 1):
            b = _tail(c[q], h, H)
            p = b - b_prev
            b_prev = b
            psum += p
            if counts[h - 1, q] > 0:
                if p <= 0.0:
                    return -INFINITY
                ll += counts[h - 1, q] * log(p)
        p = 1.0 - psum
        if counts[h - 1, Q - 1] > 0:
            if p <= 0.0:
                return -INFINITY
            ll += counts[h - 1, Q - 1] * log(p)
    return ll


def loglik_grad_from_counts(const double[:, ::1] counts, const double[::1] c):
    """Gradient of ``loglik_from_counts`` in the cutoffs ``c``."""
    cdef Py_ssize_t H = counts.shape[0]
    cdef Py_ssize_t Q = counts.shape[1]
    grad = np.zeros(Q - 1)
    if Q == 1:
        return grad
    cdef double[::1] vgrad = grad
    cdef double[:, ::1] ratio = np.zeros((H, Q))
    cdef Py_ssize_t h, q, t
    cdef double b, b_prev, p, psum, comb, dens, acc
    cdef double rowsum
    for h in range(1, H + 1):
        rowsum = 0
        for q in range(Q):
            rowsum += counts[h - 1, q]
        if rowsum == 0:
            continue
        b_prev = 0.0
        psum = 0.0
        for q in range(Q - 1):
            b = _tail(c[q], h, H)
            p = b - b_prev
            b_prev = b
            psum += p
            if counts[h - 1, q] > 0:
                ratio[h - 1, q] = counts[h - 1, q] / p
        p = 1.0 - psum
        if counts[h - 1, Q - 1] > 0:
            ratio[h - 1, Q - 1] = counts[h - 1, Q - 1] / p
    for q in range(Q - 1):
        acc = 0.0
        comb = 1.0
        for h in range(1, H + 1):
            comb = comb * (H - h + 1) / h       # C(H, h)
            dens = h * comb * pow(c[q], h - 1) * pow(1.0 - c[q], H - h)
            acc += dens * (ratio[h - 1, q] - ratio[h - 1, q + 1])
        vgrad[q] = acc
    return grad


def pava_non_increasing(const double[::1] values, const double[::1] weights):
    """Weighted least-squares projection onto non-increasing sequences."""
    cdef Py_ssize_t n = values.shape[0]
    out = np.empty(n)
    cdef double[::1] vout = out
    cdef long long[::1] start = np.empty(n, dtype=np.longlong)
    cdef double[::1] wsum = np.empty(n)
    cdef double[::1] vsum = np.empty(n)
    cdef Py_ssize_t nb = 0
    cdef Py_ssize_t i, b, lo, hi
    cdef double ws, vs
    for i in range(n):
        start[nb] = i
        wsum[nb] = weights[i]
        vsum[nb] = weights[i] * values[i]
        nb += 1
        while nb >= 2 and vsum[nb - 2] * wsum[nb - 1] < vsum[nb - 1] * wsum[nb - 2]:
            wsum[nb - 2] += wsum[nb - 1]
            vsum[nb - 2] += vsum[nb - 1]
            nb -= 1
    for b in range(nb):
        lo = start[b]
        hi = start[b + 1] if b + 1 < nb else n
        ws = 0.0
        vs = 0.0
        for i in range(lo, hi):
            ws += weights[i]
            vs += weights[i] * values[i]
        for i in range(lo, hi):
            vout[i] = vs / ws
    return out

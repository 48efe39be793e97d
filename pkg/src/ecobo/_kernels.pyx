# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Matern 5/2 covariance kernels.

Same contracts as ``_kernels_py``; model fitting spends most of its time in
these two loops, so they are written as flat C loops and release the GIL.
"""

import numpy as np

from libc.math cimport exp, sqrt

cdef double SQRT5 = sqrt(5.0)

BACKEND_NAME = "compiled"


def cross_covariance(X1, X2, lengthscales, double signal_variance):
    """Matern 5/2 ARD covariance matrix between two point sets (no noise)."""
    cdef double[:, ::1] A = np.ascontiguousarray(X1, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(X2, dtype=np.float64)
    cdef double[::1] ell = np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef Py_ssize_t n1 = A.shape[0], n2 = B.shape[0], dim = A.shape[1]
    if B.shape[1] != dim or ell.shape[0] != dim:
        raise ValueError("dimension mismatch")
    out_arr = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double r2, r, t
    with nogil:
        for i in range(n1):
            for j in range(n2):
                r2 = 0.0
                for d in range(dim):
                    t = (A[i, d] - B[j, d]) / ell[d]
                    r2 += t * t
                r = sqrt(r2)
                out[i, j] = signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * exp(-SQRT5 * r)
    return out_arr


def grad_traces(X, lengthscales, double signal_variance, M):
    """Trace terms of the evidence gradient; see _kernels_py.grad_traces."""
    cdef double[:, ::1] A = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] ell = np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef double[:, ::1] W = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], dim = A.shape[1]
    if ell.shape[0] != dim or W.shape[0] != n or W.shape[1] != n:
        raise ValueError("dimension mismatch")
    out_arr = np.zeros(1 + dim, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double r2, r, e, k, base, t, w, acc0, s
    cdef double[::1] sq = np.empty(dim, dtype=np.float64)
    with nogil:
        acc0 = 0.0
        for i in range(n):
            # diagonal: r = 0, K_ii = signal_variance, lengthscale grads vanish
            acc0 += 0.5 * W[i, i] * signal_variance
            for j in range(i + 1, n):
                r2 = 0.0
                for d in range(dim):
                    t = (A[i, d] - A[j, d]) / ell[d]
                    s = t * t
                    sq[d] = s
                    r2 += s
                r = sqrt(r2)
                e = exp(-SQRT5 * r)
                k = signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e
                base = (5.0 / 3.0) * signal_variance * (1.0 + SQRT5 * r) * e
                w = W[i, j]  # symmetric: count (i,j) and (j,i) once, doubled
                acc0 += w * k
                for d in range(dim):
                    out[1 + d] += w * base * sq[d]
        out[0] = acc0
    return out_arr

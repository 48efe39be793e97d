"""Pure-numpy implementation of the hot covariance kernels.

Reference semantics for the compiled twin in ``_kernels.pyx``; the two must
agree to float64 roundoff (see tests/test_backend.py and
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import numpy as np

SQRT5 = np.sqrt(5.0)

BACKEND_NAME = "python"


def cross_covariance(X1: np.ndarray, X2: np.ndarray,
                     lengthscales: np.ndarray, signal_variance: float) -> np.ndarray:
    """Matern 5/2 ARD covariance matrix between two point sets.

    k(r) = s2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r) with r the
    lengthscale-scaled Euclidean distance. No noise term.
    """
    X1 = np.ascontiguousarray(X1, dtype=float)
    X2 = np.ascontiguousarray(X2, dtype=float)
    d = (X1[:, None, :] - X2[None, :, :]) / lengthscales
    r2 = np.einsum("ijk,ijk->ij", d, d)
    r = np.sqrt(r2)
    return signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-SQRT5 * r)


def grad_traces(X: np.ndarray, lengthscales: np.ndarray,
                signal_variance: float, M: np.ndarray) -> np.ndarray:
    """Trace terms of the evidence gradient for the Matern 5/2 kernel.

    Returns ``g`` of length 1 + dim with
      g[0]   = 0.5 * sum(M * K)                  (d/d log signal_variance)
      g[1+d] = 0.5 * sum(M * dK/d log ell_d)
    where K is the noise-free kernel matrix on X and
    dK/d log ell_d = (5/3) s2 (1 + sqrt(5) r) exp(-sqrt(5) r) * ((x_d-x_d')/ell_d)^2.
    """
    X = np.ascontiguousarray(X, dtype=float)
    d = (X[:, None, :] - X[None, :, :]) / lengthscales
    s2 = d * d
    r2 = s2.sum(axis=2)
    r = np.sqrt(r2)
    e = np.exp(-SQRT5 * r)
    K = signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2) * e
    base = (5.0 / 3.0) * signal_variance * (1.0 + SQRT5 * r) * e * M
    out = np.empty(1 + X.shape[1])
    out[0] = 0.5 * np.sum(M * K)
    out[1:] = 0.5 * np.einsum("ij,ijk->k", base, s2)
    return out

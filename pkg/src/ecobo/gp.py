"""Gaussian-process regression with an ARD Matern 5/2 kernel.

Surrogate for both the transformed runtime objective and the transformed
performance constraint. Targets are standardized internally; kernel
hyperparameters are set by maximizing the log marginal likelihood with a
multi-start L-BFGS-B in log-space. Dense Cholesky throughout: the budgets
this engine runs at never exceed a few hundred observations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from . import backend

log = logging.getLogger(__name__)

NOISE_FLOOR = 1e-6
JITTERS = (0.0, 1e-8, 1e-6, 1e-4)
N_RESTARTS = 8
MAX_OPT_ITER = 200

# log-space optimization bounds: signal variance, lengthscales, noise variance
_BOUNDS_SIGNAL = (np.log(1e-8), np.log(1e4))
_BOUNDS_LENGTH = (np.log(1e-3), np.log(1e2))
_BOUNDS_NOISE = (np.log(NOISE_FLOOR), np.log(1e2))


class GpFitError(RuntimeError):
    """Model fitting failed (degenerate kernel matrix or invalid targets)."""


@dataclass(frozen=True)
class KernelParams:
    """Matern 5/2 hyperparameters: signal variance, ARD lengthscales, noise."""

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        object.__setattr__(self, "lengthscales",
                           np.ascontiguousarray(self.lengthscales, dtype=float))
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ValueError("signal_variance must be finite and > 0")
        if not np.all(np.isfinite(self.lengthscales) & (self.lengthscales > 0)):
            raise ValueError("lengthscales must be finite and > 0")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= NOISE_FLOOR):
            raise ValueError(f"noise_variance must be >= {NOISE_FLOOR}")


@dataclass(frozen=True)
class GpModel:
    """Fitted posterior: immutable after fit, safe to share across threads."""

    X: np.ndarray            # training inputs in the unit cube, (n, dim)
    y_raw: np.ndarray        # training targets in raw units
    y_mean: float
    y_std: float
    params: KernelParams
    chol: np.ndarray         # lower Cholesky factor of K + noise*I (+ jitter)
    alpha: np.ndarray        # (K + noise*I)^-1 z for standardized targets z

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def kernel_matern52(x1, x2, params: KernelParams) -> float:
    """Covariance between two single points."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    if x1.shape[1] != x2.shape[1] or x1.shape[1] != len(params.lengthscales):
        raise ValueError("dimension mismatch")
    return float(backend.cross_covariance(x1, x2, params.lengthscales,
                                          params.signal_variance)[0, 0])


def _chol_with_jitter(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure."""
    for jitter in JITTERS:
        try:
            return cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise GpFitError("kernel matrix not positive definite after jitter escalation")


def log_marginal_likelihood(X, y, params: KernelParams,
                            return_grad: bool = False):
    """Gaussian log evidence of targets ``y`` under the kernel.

    ``y`` is used as given; fit() passes standardized targets. With
    ``return_grad`` also returns the gradient with respect to the log
    hyperparameters ``(log signal_variance, log ell_1.., log noise_variance)``.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    K = backend.cross_covariance(X, X, params.lengthscales, params.signal_variance)
    K[np.diag_indices_from(K)] += params.noise_variance
    L = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y)
    lml = (-0.5 * float(y @ alpha)
           - float(np.log(np.diag(L)).sum())
           - 0.5 * n * np.log(2.0 * np.pi))
    if not return_grad:
        return lml
    # d lml / d theta_j = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta_j)
    M = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n))
    grad = np.empty(2 + len(params.lengthscales))
    traces = backend.grad_traces(X, params.lengthscales, params.signal_variance, M)
    grad[0] = traces[0]
    grad[1:-1] = traces[1:]
    grad[-1] = 0.5 * params.noise_variance * float(np.trace(M))
    return lml, grad


def _unpack(theta: np.ndarray, dim: int) -> KernelParams:
    return KernelParams(signal_variance=float(np.exp(theta[0])),
                        lengthscales=np.exp(theta[1:1 + dim]),
                        noise_variance=float(np.exp(theta[-1])))


def fit(X, y, seed: int) -> GpModel:
    """Fit kernel hyperparameters by multi-start evidence maximization.

    Deterministic given (X, y, seed): restart initializations come from a
    seeded generator, and the best restart (ties to the earliest) wins.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise GpFitError("X must be 2-dimensional (n, dim)")
    n, dim = X.shape
    if n < 2:
        raise GpFitError("need at least 2 observations to fit")
    if y.shape != (n,):
        raise GpFitError(f"targets must have shape ({n},)")
    if not np.all(np.isfinite(y)):
        raise GpFitError("non-finite targets")

    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std < 1e-12:
        y_std = 1.0
    z = (y - y_mean) / y_std

    def objective(theta):
        try:
            lml, grad = log_marginal_likelihood(X, z, _unpack(theta, dim),
                                                return_grad=True)
        except GpFitError:
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    bounds = [_BOUNDS_SIGNAL] + [_BOUNDS_LENGTH] * dim + [_BOUNDS_NOISE]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0x6790]))
    best_theta = None
    best_nll = np.inf
    for restart in range(N_RESTARTS):
        if restart == 0:
            theta0 = np.concatenate(([0.0], np.full(dim, np.log(0.5)), [np.log(1e-2)]))
        else:
            theta0 = np.concatenate((
                rng.uniform(np.log(1e-2), np.log(1e2), 1),
                rng.uniform(np.log(1e-2), np.log(1e1), dim),
                rng.uniform(np.log(NOISE_FLOOR), 0.0, 1),
            ))
        res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                       bounds=bounds, options={"maxiter": MAX_OPT_ITER})
        if np.isfinite(res.fun) and res.fun < best_nll:
            best_nll = res.fun
            best_theta = res.x
    if best_theta is None:
        raise GpFitError("all hyperparameter restarts failed")

    params = _unpack(best_theta, dim)
    K = backend.cross_covariance(X, X, params.lengthscales, params.signal_variance)
    K[np.diag_indices_from(K)] += params.noise_variance
    L = _chol_with_jitter(K)
    alpha = cho_solve((L, True), z)
    return GpModel(X=X, y_raw=y, y_mean=y_mean, y_std=y_std,
                   params=params, chol=L, alpha=alpha)


def predict(model: GpModel, x):
    """Posterior mean and variance in raw target units.

    Accepts a single point (returns floats) or a batch ``(m, dim)``
    (returns arrays). The variance is for a new noisy observation, i.e. it
    includes the learned noise variance, and is clamped at zero.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = np.atleast_2d(x)
    if Xq.shape[1] != model.dim:
        raise ValueError(f"expected dim {model.dim}, got {Xq.shape[1]}")
    if not np.all(np.isfinite(Xq)):
        raise ValueError("non-finite query point")
    ks = backend.cross_covariance(Xq, model.X, model.params.lengthscales,
                                  model.params.signal_variance)
    mean = model.y_mean + model.y_std * (ks @ model.alpha)
    v = solve_triangular(model.chol, ks.T, lower=True)
    latent = model.params.signal_variance + model.params.noise_variance \
        - np.einsum("ij,ij->j", v, v)
    var = model.y_std ** 2 * np.maximum(latent, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var

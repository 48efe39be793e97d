"""Acquisition functions and their maximizer.

Two modes, matching the two algorithms the benchmark compares:

* ``cbo_joint`` — Expected Improvement on the runtime surrogate multiplied
  by the Probability of Feasibility of the constraint surrogate, so a
  candidate scores highly only where improvement and feasibility are both
  likely. Before any feasible observation exists, PoF alone is maximized.
* ``penalized_ei`` — plain EI on a single surrogate fitted to the
  quadratically penalized objective (see :func:`penalized_objective`).

All values are for minimization of the transformed objective.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .gp import GpModel, predict

log = logging.getLogger(__name__)

MODES = ("cbo_joint", "penalized_ei")

N_CANDIDATES = 1024
N_LOCAL_STARTS = 5
MAX_LOCAL_STEPS = 100
_INITIAL_STEP = 0.25
_MIN_STEP = 1e-4
_TINY = 1e-300  # acquisition values below this are flushed to exact zero


class AcquisitionError(RuntimeError):
    """No usable acquisition value anywhere on the cube."""


@dataclass(frozen=True)
class AcquisitionContext:
    """Everything the maximizer needs for one proposal."""

    mode: str
    objective_model: GpModel
    constraint_model: GpModel | None = None
    f_best: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown acquisition mode {self.mode!r}")
        if self.mode == "cbo_joint" and self.constraint_model is None:
            raise ValueError("cbo_joint requires a constraint model")
        if self.mode == "penalized_ei" and self.f_best is None:
            raise ValueError("penalized_ei requires f_best")


def _phi(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def expected_improvement(mean, stddev, f_best):
    """EI for minimization: E[max(0, f_best - Y)], Y ~ N(mean, stddev^2).

    Vectorized; the stddev := 0 limit is max(0, f_best - mean).
    """
    mean = np.asarray(mean, dtype=float)
    stddev = np.asarray(stddev, dtype=float)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(stddev)) and np.isfinite(f_best)):
        raise ValueError("non-finite EI inputs")
    if np.any(stddev < 0):
        raise ValueError("negative stddev")
    imp = f_best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stddev > 0, imp / np.where(stddev > 0, stddev, 1.0), 0.0)
        ei = np.where(stddev > 0, imp * ndtr(z) + stddev * _phi(z), np.maximum(imp, 0.0))
    ei = np.where(ei < _TINY, 0.0, ei)
    return float(ei) if ei.ndim == 0 else ei


def probability_of_feasibility(mean_c, stddev_c):
    """P(constraint value <= 0) under the constraint surrogate posterior.

    Degenerate stddev := 0 resolves to a hard 0/1 indicator.
    """
    mean_c = np.asarray(mean_c, dtype=float)
    stddev_c = np.asarray(stddev_c, dtype=float)
    if not (np.all(np.isfinite(mean_c)) and np.all(np.isfinite(stddev_c))):
        raise ValueError("non-finite PoF inputs")
    if np.any(stddev_c < 0):
        raise ValueError("negative stddev")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stddev_c > 0, -mean_c / np.where(stddev_c > 0, stddev_c, 1.0), 0.0)
        pof = np.where(stddev_c > 0, ndtr(z), (mean_c <= 0).astype(float))
    return float(pof) if pof.ndim == 0 else pof


def penalized_objective(y_f, y_c, inv_two_rho):
    """Fold the constraint into the objective with a quadratic penalty.

    Returns ``y_f + inv_two_rho * max(0, y_c)^2``: untouched on the
    feasible side, growing quadratically with the violation.
    """
    y_f = np.asarray(y_f, dtype=float)
    y_c = np.asarray(y_c, dtype=float)
    if not (np.all(np.isfinite(y_f)) and np.all(np.isfinite(y_c)) and np.isfinite(inv_two_rho)):
        raise ValueError("non-finite penalty inputs")
    if inv_two_rho < 0:
        raise ValueError("penalty weight must be >= 0")
    out = y_f + inv_two_rho * np.square(np.maximum(y_c, 0.0))
    return float(out) if out.ndim == 0 else out


def _evaluate_batch(ctx: AcquisitionContext, X: np.ndarray) -> np.ndarray:
    """Acquisition values for a batch of unit-cube points."""
    mu_f, var_f = predict(ctx.objective_model, X)
    sd_f = np.sqrt(var_f)
    if ctx.mode == "penalized_ei":
        return expected_improvement(mu_f, sd_f, ctx.f_best)
    mu_c, var_c = predict(ctx.constraint_model, X)
    pof = probability_of_feasibility(mu_c, np.sqrt(var_c))
    if ctx.f_best is None:
        return pof  # cold start: no feasible observation to improve on yet
    vals = expected_improvement(mu_f, sd_f, ctx.f_best) * pof
    return np.where(vals < _TINY, 0.0, vals)


def joint_acquisition(ctx: AcquisitionContext, x) -> float:
    """Acquisition value at a single unit-cube point."""
    return float(_evaluate_batch(ctx, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def _maximize_fn(fn, dim: int, seed: int) -> np.ndarray:
    """Maximize ``fn`` (batch callable) over the cube.

    Seeded Sobol scan followed by a compass pattern search from the top
    starts. Strict-improvement comparisons everywhere, so ties resolve to
    the lowest candidate index and the result is order-independent.
    """
    engine = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
    cands = engine.random(N_CANDIDATES)
    vals = np.asarray(fn(cands), dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        raise AcquisitionError("acquisition is non-finite at every candidate")

    masked = np.where(finite, vals, -np.inf)
    best_idx = int(np.argmax(masked))  # argmax returns the first maximizer
    best_x = cands[best_idx].copy()
    best_val = masked[best_idx]

    order = np.argsort(-masked, kind="stable")[:N_LOCAL_STARTS]
    eye = np.eye(dim)
    for start in order:
        if not finite[start]:
            continue
        x = cands[start].copy()
        fx = vals[start]
        step = _INITIAL_STEP
        for _ in range(MAX_LOCAL_STEPS):
            if step < _MIN_STEP:
                break
            probes = np.clip(np.concatenate([x + step * eye, x - step * eye]), 0.0, 1.0)
            pv = np.asarray(fn(probes), dtype=float)
            pv = np.where(np.isfinite(pv), pv, -np.inf)
            j = int(np.argmax(pv))
            if pv[j] > fx:
                x, fx = probes[j], pv[j]
            else:
                step *= 0.5
        if fx > best_val:
            best_val = fx
            best_x = x
    return best_x


def maximize(ctx: AcquisitionContext, space_dim: int, seed: int) -> np.ndarray:
    """Propose the next point: argmax of the context's acquisition."""
    if ctx.objective_model.dim != space_dim:
        raise ValueError("model dimension does not match space dimension")
    return _maximize_fn(lambda X: _evaluate_batch(ctx, X), space_dim, seed)

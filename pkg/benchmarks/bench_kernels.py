#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the two hot routines (covariance matrix construction and the
evidence-gradient traces) over a grid of problem sizes, then a full model
fit through each backend. Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from ecobo import _kernels_py

try:
    from ecobo import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels() -> None:
    print(f"{'routine':<18} {'n':>5} {'dim':>4} {'python':>12} {'compiled':>12} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in (16, 50, 100, 200):
        for dim in (2, 6):
            X = rng.random((n, dim))
            ell = rng.uniform(0.2, 1.5, dim)
            M = rng.standard_normal((n, n))
            M = (M + M.T) / 2

            for label, args in (
                ("cross_covariance", (X, X, ell, 1.7)),
                ("grad_traces", (X, ell, 1.7, M)),
            ):
                t_py = best_of(lambda: getattr(_kernels_py, label)(*args))
                if _kernels is None:
                    print(f"{label:<18} {n:>5} {dim:>4} {t_py*1e6:>10.1f}us {'n/a':>12}")
                    continue
                t_cy = best_of(lambda: getattr(_kernels, label)(*args))
                ref = getattr(_kernels_py, label)(*args)
                got = getattr(_kernels, label)(*args)
                assert np.allclose(ref, got, rtol=1e-12, atol=1e-12), label
                print(f"{label:<18} {n:>5} {dim:>4} {t_py*1e6:>10.1f}us "
                      f"{t_cy*1e6:>10.1f}us {t_py/t_cy:>7.1f}x")


def bench_fit() -> None:
    import importlib
    import os

    import ecobo.backend
    import ecobo.gp

    rng = np.random.default_rng(1)
    X = rng.random((60, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.standard_normal(60)

    results = {}
    for forced, label in ((None, "compiled"), ("1", "python")):
        if forced is None and _kernels is None:
            continue
        if forced is None:
            os.environ.pop("ECOBO_PURE_PYTHON", None)
        else:
            os.environ["ECOBO_PURE_PYTHON"] = forced
        importlib.reload(ecobo.backend)
        importlib.reload(ecobo.gp)
        t = best_of(lambda: ecobo.gp.fit(X, y, seed=3), repeats=3)
        results[label] = t
        print(f"gp.fit n=60 dim=3 [{ecobo.backend.BACKEND:>8}]: {t*1e3:.1f} ms")
    if len(results) == 2:
        print(f"fit speedup: {results['python'] / results['compiled']:.2f}x")
    os.environ.pop("ECOBO_PURE_PYTHON", None)
    importlib.reload(ecobo.backend)
    importlib.reload(ecobo.gp)


if __name__ == "__main__":
    if _kernels is None:
        print("compiled backend unavailable; timing pure python only")
    bench_kernels()
    print()
    bench_fit()

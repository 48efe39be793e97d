#!/usr/bin/env python3
"""Regenerate the brute-force optima fixture for the bundled synthetic problems.

Enumerates each problem's surfaces on a dense axis-aligned grid (1000 points
per dimension by default), keeps the best objective value among
threshold-satisfying grid points, and writes the result to
src/ecobo/data/synthetic_optima.json. The stored values are what the
end-to-end benchmark tests compare optimizer output against, so rerun this
after touching any surface definition.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import pathlib

import numpy as np

from ecobo.evaluators import SYNTHETIC_PROBLEMS
from ecobo.optimizer import is_feasible_raw

DEFAULT_RESOLUTION = 1000
FIXTURE = pathlib.Path(__file__).resolve().parent.parent / "src" / "ecobo" / "data" / "synthetic_optima.json"


def grid_optimum(problem, resolution: int) -> dict:
    axes = [np.linspace(p.low, p.high, resolution) for p in problem.space.params]
    names = problem.space.names
    best_f = math.inf
    best_point = None
    best_metric = None
    for combo in itertools.product(*axes):
        values = dict(zip(names, combo))
        metric = problem.metric_surface(values)
        if not is_feasible_raw(problem.task, metric, problem.threshold):
            continue
        f = problem.objective_surface(values)
        if f < best_f:
            best_f = f
            best_point = values
            best_metric = metric
    if best_point is None:
        raise RuntimeError(f"{problem.name}: no feasible grid point")
    return {
        "grid_resolution": resolution,
        "params": {k: float(v) for k, v in best_point.items()},
        "objective_value": best_f,
        "runtime_seconds": math.exp(best_f),
        "metric": best_metric,
        "threshold": problem.threshold,
        "task": problem.task,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION,
                    help="grid points per dimension (default %(default)s)")
    ap.add_argument("--out", type=pathlib.Path, default=FIXTURE)
    args = ap.parse_args()

    table = {}
    for name, problem in sorted(SYNTHETIC_PROBLEMS.items()):
        table[name] = grid_optimum(problem, args.resolution)
        print(f"{name}: objective {table[name]['objective_value']:.6f} "
              f"at {table[name]['params']}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

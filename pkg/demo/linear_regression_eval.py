#!/usr/bin/env python3
"""Demo external evaluator: gradient-descent linear regression on generated data.

Illustrates the evaluator protocol only; this is a toy, not a reproduction
of any published experiment. Invoke through a command template like

    python demo/linear_regression_eval.py {params_file}

Hyperparameters (JSON object in the params file):
    epochs        int   gradient-descent sweeps (drives runtime)
    learning_rate float step size
    l2            float ridge penalty

Protocol notes: the final stdout line is {"metric": training_mse,
"runtime_seconds": seconds}. The reported runtime covers training only;
data generation is excluded (that is this script's choice of the
train/measure boundary, exercised via the runtime override field).
"""

import json
import sys
import time

import numpy as np


def main() -> int:
    with open(sys.argv[1]) as fh:
        params = json.load(fh)
    epochs = int(params["epochs"])
    lr = float(params["learning_rate"])
    l2 = float(params["l2"])

    rng = np.random.default_rng(0)  # fixed dataset across evaluations
    X = rng.standard_normal((4000, 20))
    w_true = rng.standard_normal(20)
    y = X @ w_true + 0.5 * rng.standard_normal(4000)

    start = time.perf_counter()
    w = np.zeros(20)
    for _ in range(epochs):
        grad = 2.0 * (X.T @ (X @ w - y)) / len(y) + 2.0 * l2 * w
        w -= lr * grad
    train_seconds = time.perf_counter() - start

    mse = float(np.mean((X @ w - y) ** 2))
    print(f"trained {epochs} epochs", file=sys.stderr)
    print(json.dumps({"metric": mse, "runtime_seconds": train_seconds}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

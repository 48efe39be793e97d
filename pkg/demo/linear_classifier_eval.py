#!/usr/bin/env python3
"""Demo external evaluator: logistic-regression classifier on generated data.

Toy illustration of the evaluator protocol (not a reproduction of any
published experiment). Invoke as

    python demo/linear_classifier_eval.py {params_file}

Hyperparameters: epochs (int), learning_rate (float), l2 (float).

This script reports no runtime_seconds field, so the engine uses the
measured wallclock of the whole process, data generation included — the
opposite train/measure boundary choice from the regression demo.
"""

import json
import sys

import numpy as np


def main() -> int:
    with open(sys.argv[1]) as fh:
        params = json.load(fh)
    epochs = int(params["epochs"])
    lr = float(params["learning_rate"])
    l2 = float(params["l2"])

    rng = np.random.default_rng(1)
    n = 3000
    X = np.vstack([rng.standard_normal((n // 2, 10)) + 0.7,
                   rng.standard_normal((n // 2, 10)) - 0.7])
    y = np.concatenate([np.ones(n // 2), np.zeros(n // 2)])

    w = np.zeros(10)
    b = 0.0
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(X @ w + b)))
        err = p - y
        w -= lr * (X.T @ err / n + 2.0 * l2 * w)
        b -= lr * float(err.mean())

    acc = float(np.mean((1.0 / (1.0 + np.exp(-(X @ w + b))) > 0.5) == y))
    print(json.dumps({"metric": acc}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

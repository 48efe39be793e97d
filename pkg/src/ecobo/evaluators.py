"""Black boxes the optimizer can measure.

Two families:

* deterministic synthetic problems with known (grid-enumerated) constrained
  optima, used by the test suite and the bundled benchmark configs;
* an external-command protocol that trains a real model in a subprocess and
  measures wallclock time, the energy proxy everything here minimizes.

External protocol: the command template's ``{params_file}`` token is
replaced by the path of a temp JSON file holding the parameter values; the
last stdout line must be a JSON object ``{"metric": <number>,
"runtime_seconds": <number, optional>}``; exit code 0 means ok. A reported
``runtime_seconds`` overrides the measured wallclock, letting evaluator
scripts exclude data-loading time (the bundled demo scripts document what
they count).
"""

from __future__ import annotations

import json
import logging
import math
import os
import shlex
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Mapping

import numpy as np

from .space import ParamSpec, SearchSpace

log = logging.getLogger(__name__)

PARAMS_TOKEN = "{params_file}"


@dataclass(frozen=True)
class EvaluationResult:
    """Outcome of one black-box evaluation."""

    runtime_seconds: float | None
    metric: float                  # NaN when unavailable
    status: str                    # "ok" | "failed"
    cpu_seconds: float | None = None  # children CPU time, diagnostics only
    detail: str = ""

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "ok":
            if self.runtime_seconds is None or not (
                    math.isfinite(self.runtime_seconds) and self.runtime_seconds > 0):
                raise ValueError("ok result requires a positive finite runtime")


def failed_result(detail: str, runtime_seconds: float | None = None,
                  metric: float = float("nan")) -> EvaluationResult:
    return EvaluationResult(runtime_seconds=runtime_seconds, metric=metric,
                            status="failed", detail=detail)


# -- synthetic problems -------------------------------------------------------

@dataclass(frozen=True)
class SyntheticProblem:
    """Analytic benchmark surface with a grid-enumerated constrained optimum.

    The objective surface is exponentiated into a fake positive "runtime";
    the metric surface is reported exactly. Evaluations are deterministic
    given the noise seed.
    """

    name: str
    space: SearchSpace
    task: str
    threshold: float
    objective_surface: Callable[[Mapping[str, float]], float]
    metric_surface: Callable[[Mapping[str, float]], float]
    noise_scale: float = 0.01


def evaluate_synthetic(problem: SyntheticProblem, values: Mapping[str, Any],
                       noise_seed: int | np.random.SeedSequence) -> EvaluationResult:
    """Fake-runtime evaluation: exp(objective surface) times seeded noise."""
    f = problem.objective_surface(values)
    metric = problem.metric_surface(values)
    eps = 0.0
    if problem.noise_scale > 0:
        rng = np.random.default_rng(noise_seed)
        eps = problem.noise_scale * rng.standard_normal()
    return EvaluationResult(runtime_seconds=float(math.exp(f) * (1.0 + eps)),
                            metric=float(metric), status="ok")


def make_synthetic_evaluator(problem: SyntheticProblem,
                             seed: int) -> Callable[[Mapping[str, Any]], EvaluationResult]:
    """Per-trial evaluator: call k gets noise stream (seed, k). Deterministic."""
    counter = {"k": 0}

    def evaluator(values: Mapping[str, Any]) -> EvaluationResult:
        k = counter["k"]
        counter["k"] += 1
        return evaluate_synthetic(problem, values,
                                  np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5E, k]))

    return evaluator


def _gardner1_objective(v: Mapping[str, float]) -> float:
    return math.cos(2.0 * v["x"]) * math.cos(v["y"]) + math.sin(v["x"])


def _gardner1_metric(v: Mapping[str, float]) -> float:
    return math.cos(v["x"]) * math.cos(v["y"]) - math.sin(v["x"]) * math.sin(v["y"])


def _tradeoff1_objective(v: Mapping[str, float]) -> float:
    return 1.0 - 1.2 * v["x"]


def _tradeoff1_metric(v: Mapping[str, float]) -> float:
    return 0.5 * math.exp(1.2 * v["x"])


SYNTHETIC_PROBLEMS: dict[str, SyntheticProblem] = {
    # classic 2-D trig testbed: both surfaces multimodal, ~66% of the square
    # feasible, optimum on the y = 0 edge
    "gardner1": SyntheticProblem(
        name="gardner1",
        space=SearchSpace(params=(
            ParamSpec(name="x", kind="continuous", low=0.0, high=6.0),
            ParamSpec(name="y", kind="continuous", low=0.0, high=6.0),
        )),
        task="regression",
        threshold=0.5,
        objective_surface=_gardner1_objective,
        metric_surface=_gardner1_metric,
    ),
    # monotone 1-D conflict: runtime falls with x while the error metric
    # grows, so the unconstrained runtime optimum violates the threshold
    "tradeoff1": SyntheticProblem(
        name="tradeoff1",
        space=SearchSpace(params=(
            ParamSpec(name="x", kind="continuous", low=0.0, high=1.0),
        )),
        task="regression",
        threshold=1.0,
        objective_surface=_tradeoff1_objective,
        metric_surface=_tradeoff1_metric,
    ),
}


def known_optimum(name: str) -> dict[str, Any]:
    """Grid-oracle fixture for a bundled problem (see scripts/grid_oracle.py)."""
    text = resources.files("ecobo").joinpath("data/synthetic_optima.json").read_text()
    table = json.loads(text)
    if name not in table:
        raise KeyError(f"no stored optimum for {name!r}")
    return table[name]


# -- external command protocol ------------------------------------------------

def evaluate_external(command_template: str, values: Mapping[str, Any],
                      timeout: float | None = None) -> EvaluationResult:
    """Run one external evaluation; every failure maps to a failed result.

    Wallclock is measured on a monotonic clock from spawn to exit. The
    child runs in its own session so a timeout can reap the whole process
    group without orphaning grandchildren.
    """
    if PARAMS_TOKEN not in command_template:
        raise ValueError(f"command template must contain {PARAMS_TOKEN}")

    fd, params_path = tempfile.mkstemp(prefix="ecobo_params_", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(dict(values), fh)
        argv = [a.replace(PARAMS_TOKEN, params_path)
                for a in shlex.split(command_template)]
        cpu0 = _children_cpu()
        start = time.monotonic()
        try:
            proc = subprocess.Popen(argv, stdout=subprocess.PIPE,
                                    stderr=subprocess.PIPE, text=True,
                                    start_new_session=True)
        except OSError as exc:
            return failed_result(f"spawn failed: {exc}")
        try:
            out, err = proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            elapsed = time.monotonic() - start
            try:
                os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
            proc.communicate()
            return failed_result(f"timeout after {timeout:.3g}s",
                                 runtime_seconds=elapsed)
        elapsed = time.monotonic() - start
        cpu = _children_cpu() - cpu0

        if proc.returncode != 0:
            return failed_result(
                f"exit code {proc.returncode}; stderr: {err.strip()[-500:]}",
                runtime_seconds=elapsed)

        lines = [ln for ln in out.splitlines() if ln.strip()]
        if not lines:
            return failed_result("no output on stdout", runtime_seconds=elapsed)
        try:
            payload = json.loads(lines[-1])
            metric = float(payload["metric"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            return failed_result(f"unparsable result line {lines[-1]!r}: {exc}",
                                 runtime_seconds=elapsed)

        runtime = elapsed
        if "runtime_seconds" in payload and payload["runtime_seconds"] is not None:
            try:
                runtime = float(payload["runtime_seconds"])
            except (TypeError, ValueError):
                return failed_result(
                    f"bad runtime_seconds in result line {lines[-1]!r}",
                    runtime_seconds=elapsed)
        if math.isnan(metric):
            # the evaluation ran but produced no usable score; keep the NaN
            return failed_result("metric is NaN", runtime_seconds=runtime,
                                 metric=metric)
        if not (math.isfinite(runtime) and runtime > 0):
            return failed_result(f"non-positive runtime {runtime}",
                                 runtime_seconds=elapsed)
        return EvaluationResult(runtime_seconds=runtime, metric=metric,
                                status="ok", cpu_seconds=cpu)
    finally:
        try:
            os.unlink(params_path)
        except OSError:
            pass


def _children_cpu() -> float:
    t = os.times()
    return t.children_user + t.children_system


class ExternalEvaluator:
    """Callable evaluator around one command template with a timeout policy.

    Unless an explicit timeout is configured, each call is capped at
    ``timeout_factor`` times the first successful runtime (the baseline
    run): a candidate that much slower than the default is already a lost
    cause for a runtime minimizer. The first call runs uncapped.
    """

    def __init__(self, command_template: str, timeout: float | None = None,
                 timeout_factor: float = 10.0):
        if PARAMS_TOKEN not in command_template:
            raise ValueError(f"command template must contain {PARAMS_TOKEN}")
        self.command_template = command_template
        self.timeout = timeout
        self.timeout_factor = timeout_factor
        self.reference_runtime: float | None = None

    def current_timeout(self) -> float | None:
        if self.timeout is not None:
            return self.timeout
        if self.reference_runtime is not None:
            return self.timeout_factor * self.reference_runtime
        return None

    def __call__(self, values: Mapping[str, Any]) -> EvaluationResult:
        result = evaluate_external(self.command_template, values,
                                   timeout=self.current_timeout())
        if result.status == "ok" and self.reference_runtime is None:
            self.reference_runtime = result.runtime_seconds
        if result.status == "failed":
            log.warning("external evaluation failed: %s", result.detail)
        return result

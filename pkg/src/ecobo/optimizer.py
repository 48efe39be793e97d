"""Ask-tell optimization loop for runtime minimization under a metric bound.

Observations are kept in raw units (seconds, mse/accuracy) together with
their modeling transforms:

* objective  = log(runtime) - log(baseline_runtime), so the baseline run
  sits at 0 and halving the runtime moves it by -log 2;
* constraint = log(metric) - log(threshold) for regression (mse must stay
  below the threshold), log(threshold) - log(metric) for classification
  (accuracy must stay above it). Feasible is constraint <= 0 in both cases.

Two modes: ``cbo`` fits independent surrogates to objective and constraint
and maximizes their joint EI*PoF acquisition; ``penalized_bo`` folds the
constraint into a single penalized objective and maximizes plain EI on it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import acquisition, gp, space as space_mod
from .space import SearchSpace, decode, encode, sample

log = logging.getLogger(__name__)

MODES = ("cbo", "penalized_bo")
TASKS = ("regression", "classification")

METRIC_CLAMP = 1e-12  # non-positive metrics are clamped here before the log

SNAPSHOT_VERSION = "1.0"


class BudgetExhausted(RuntimeError):
    """ask() called after the evaluation budget was consumed."""


# -- transforms ---------------------------------------------------------------

def transform_objective(raw_runtime: float, baseline_runtime: float) -> float:
    """Log runtime ratio against the baseline run.

    Computed as log(runtime / baseline): one correctly-rounded division
    keeps the sign exact even for adjacent floats, and the baseline run
    itself maps to 0 exactly.
    """
    if not (raw_runtime > 0 and math.isfinite(raw_runtime)):
        raise ValueError(f"runtime must be positive and finite, got {raw_runtime}")
    if not (baseline_runtime > 0 and math.isfinite(baseline_runtime)):
        raise ValueError(f"baseline runtime must be positive and finite, got {baseline_runtime}")
    return math.log(raw_runtime / baseline_runtime)


def transform_constraint(task: str, raw_metric: float, threshold: float) -> float:
    """Signed log margin to the threshold; <= 0 iff the constraint holds.

    Regression bounds the error from above (log(metric / threshold)),
    classification bounds the score from below (log(threshold / metric)).
    The single-division form keeps the sign identical to the raw
    comparison even for adjacent floats. Non-positive metrics are clamped
    to METRIC_CLAMP (the log is undefined otherwise); the caller records
    the clamp on the observation.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if not (threshold > 0 and math.isfinite(threshold)):
        raise ValueError(f"threshold must be positive and finite, got {threshold}")
    if math.isnan(raw_metric):
        raise ValueError("NaN metric has no transform; mark the observation failed")
    m = max(raw_metric, METRIC_CLAMP)
    if task == "regression":
        return math.log(m / threshold)
    return math.log(threshold / m)


def is_feasible_raw(task: str, raw_metric: float, threshold: float) -> bool:
    """The raw-units feasibility test the transform must agree with in sign."""
    if math.isnan(raw_metric):
        return False
    if task == "regression":
        return raw_metric <= threshold
    return raw_metric >= threshold


# -- problem and state --------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """One tuning task: the space, the metric bound, and the budget."""

    task: str
    threshold: float
    space: SearchSpace
    budget: int
    n_init: int | None = None
    baseline_runtime: float | None = None   # measured from the default run if None
    baseline_metric: float | None = None
    defaults: Mapping[str, Any] | None = None  # default configuration; cube midpoint if None
    name: str = "external"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ValueError("threshold must be positive and finite")
        if self.baseline_runtime is not None and not self.baseline_runtime > 0:
            raise ValueError("baseline_runtime must be positive")
        n_init = self.resolved_n_init
        if not n_init >= 2:
            raise ValueError("n_init must be >= 2")
        if not self.budget > n_init:
            raise ValueError("budget must exceed n_init")
        if self.defaults is not None:
            encode(self.space, self.defaults)  # validate eagerly

    @property
    def resolved_n_init(self) -> int:
        if self.n_init is not None:
            return self.n_init
        return max(4, 2 * self.space.dim)

    def default_values(self) -> dict[str, Any]:
        if self.defaults is not None:
            return dict(self.defaults)
        return decode(self.space, np.full(self.space.dim, 0.5))


@dataclass
class Observation:
    """One evaluated configuration, raw and transformed."""

    iteration: int
    params: dict[str, Any]
    x: np.ndarray                 # unit-cube encoding
    raw_runtime: float | None
    raw_metric: float             # NaN when the evaluation failed without a metric
    objective: float | None       # log runtime ratio; None when failed
    constraint: float | None      # log metric margin; None when failed
    failed: bool
    clamped: bool = False         # metric was <= 0 and clamped before the log
    acquisition: float | None = None

    @property
    def feasible(self) -> bool:
        return (not self.failed) and self.constraint is not None and self.constraint <= 0.0


class OptimizerState:
    """Single-owner ask/tell state for one trial.

    Mutated only through ask/tell; evaluations are strictly sequential
    within a trial so wallclock measurements are never contended.
    """

    def __init__(self, problem: ProblemSpec, mode: str, seed: int):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.problem = problem
        self.mode = mode
        self.seed = int(seed)
        self.observations: list[Observation] = []
        self.baseline_runtime = problem.baseline_runtime
        self.baseline_metric = problem.baseline_metric
        self.incumbent: Observation | None = None
        self._pending: tuple[np.ndarray, float] | None = None  # last model proposal

    # -- seeds ---------------------------------------------------------------

    def _subseed(self, *tags: int) -> np.random.SeedSequence:
        return np.random.SeedSequence([self.seed & 0xFFFFFFFF, *tags])

    def _subseed_int(self, *tags: int) -> int:
        return int(self._subseed(*tags).generate_state(1)[0])

    def _init_design(self) -> np.ndarray:
        n = self.problem.resolved_n_init - 1  # slot 0 is the default configuration
        return sample(self.problem.space, max(n, 1), seed=self._subseed(1))

    def _fallback_point(self, iteration: int) -> np.ndarray:
        # independent Sobol stream; prefix-stable, so point i is fixed per seed
        return sample(self.problem.space, iteration + 1, seed=self._subseed(2))[iteration]

    # -- ask/tell ------------------------------------------------------------

    def ask(self) -> dict[str, Any]:
        """Next configuration to evaluate."""
        i = len(self.observations)
        if i >= self.problem.budget:
            raise BudgetExhausted(f"budget of {self.problem.budget} evaluations consumed")
        self._pending = None
        if i == 0:
            return self.problem.default_values()
        if i < self.problem.resolved_n_init:
            return decode(self.problem.space, self._init_design()[i - 1])
        try:
            ctx = self._build_context(i)
            u = acquisition.maximize(ctx, self.problem.space.dim,
                                     seed=self._subseed(3, i))
            value = acquisition.joint_acquisition(ctx, u)
            self._pending = (u, value)
            return decode(self.problem.space, u)
        except (gp.GpFitError, acquisition.AcquisitionError) as exc:
            log.warning("iteration %d: %s; falling back to a quasi-random point", i, exc)
            return decode(self.problem.space, self._fallback_point(i))

    def _model_rows(self):
        ok = [o for o in self.observations if not o.failed]
        return ok

    def _build_context(self, iteration: int) -> acquisition.AcquisitionContext:
        ok = self._model_rows()
        if len(ok) < 2:
            raise gp.GpFitError("fewer than 2 successful observations")
        X = np.stack([o.x for o in ok])
        y_f = np.array([o.objective for o in ok])

        if self.mode == "cbo":
            y_c = np.array([o.constraint for o in ok])
            model_f = gp.fit(X, y_f, seed=self._subseed_int(4, iteration, 0))
            model_c = gp.fit(X, y_c, seed=self._subseed_int(4, iteration, 1))
            feasible = [o.objective for o in ok if o.constraint <= 0.0]
            f_best = min(feasible) if feasible else None
            return acquisition.AcquisitionContext(
                mode="cbo_joint", objective_model=model_f,
                constraint_model=model_c, f_best=f_best)

        # penalized_bo: one surrogate over the penalty-folded objective
        weight = self.penalty_weight()
        folded = acquisition.penalized_objective(
            y_f, np.array([o.constraint for o in ok]), weight)
        rows_x = [o.x for o in ok]
        values = list(np.atleast_1d(folded))
        worst = max(values)
        for o in self.observations:
            if o.failed:  # keep failed regions visible to the surrogate
                rows_x.append(o.x)
                values.append(worst + 1.0)
        model = gp.fit(np.stack(rows_x), np.array(values),
                       seed=self._subseed_int(4, iteration, 2))
        return acquisition.AcquisitionContext(
            mode="penalized_ei", objective_model=model, f_best=min(values))

    def penalty_weight(self) -> float:
        """Adaptive quadratic-penalty weight: the observed objective range, floored at 1."""
        vals = [o.objective for o in self.observations if not o.failed]
        if not vals:
            return 1.0
        return max(1.0, max(vals) - min(vals))

    def tell(self, values: Mapping[str, Any], raw_runtime: float | None,
             raw_metric: float, failed: bool = False) -> Observation:
        """Record one evaluation result and update the incumbent."""
        x = encode(self.problem.space, values)
        metric = float("nan") if raw_metric is None else float(raw_metric)
        runtime_bad = raw_runtime is None or not (math.isfinite(raw_runtime) and raw_runtime > 0)
        failed = bool(failed or math.isnan(metric) or runtime_bad)

        acq = None
        if self._pending is not None and np.allclose(x, self._pending[0], atol=1e-12):
            acq = self._pending[1]
        self._pending = None

        if failed:
            obs = Observation(
                iteration=len(self.observations), params=dict(values), x=x,
                raw_runtime=raw_runtime, raw_metric=metric,
                objective=None, constraint=None, failed=True, acquisition=acq)
        else:
            if self.baseline_runtime is None:
                self.baseline_runtime = float(raw_runtime)
            if self.baseline_metric is None:
                self.baseline_metric = metric
            obs = Observation(
                iteration=len(self.observations), params=dict(values), x=x,
                raw_runtime=float(raw_runtime), raw_metric=metric,
                objective=transform_objective(raw_runtime, self.baseline_runtime),
                constraint=transform_constraint(self.problem.task, metric,
                                                self.problem.threshold),
                failed=False, clamped=metric <= 0.0, acquisition=acq)
        self.observations.append(obs)
        if obs.feasible and (self.incumbent is None
                             or obs.objective < self.incumbent.objective):
            self.incumbent = obs
        return obs

    def best_by_objective(self) -> Observation | None:
        """Lowest-runtime successful observation, feasible or not.

        What an unconstrained optimizer would report as its answer.
        """
        ok = self._model_rows()
        if not ok:
            return None
        return min(ok, key=lambda o: (o.objective, o.iteration))

    # -- snapshot ------------------------------------------------------------

    def to_json(self) -> str:
        """Serialize the full state (resumable) as a JSON document."""
        doc = {
            "snapshot_version": SNAPSHOT_VERSION,
            "mode": self.mode,
            "seed": self.seed,
            "baseline_runtime": self.baseline_runtime,
            "baseline_metric": _json_float(self.baseline_metric),
            "problem": {
                "name": self.problem.name,
                "task": self.problem.task,
                "threshold": self.problem.threshold,
                "budget": self.problem.budget,
                "n_init": self.problem.resolved_n_init,
                "baseline_runtime": self.problem.baseline_runtime,
                "baseline_metric": self.problem.baseline_metric,
                "defaults": dict(self.problem.defaults) if self.problem.defaults else None,
                "space": space_mod.space_to_config(self.problem.space),
            },
            "observations": [_obs_to_doc(o) for o in self.observations],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OptimizerState":
        doc = json.loads(text)
        version = str(doc.get("snapshot_version", ""))
        if version.split(".")[0] != SNAPSHOT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported snapshot version {version!r}")
        p = doc["problem"]
        problem = ProblemSpec(
            task=p["task"], threshold=p["threshold"],
            space=space_mod.space_from_config(p["space"]),
            budget=p["budget"], n_init=p["n_init"],
            baseline_runtime=p.get("baseline_runtime"),
            baseline_metric=p.get("baseline_metric"),
            defaults=p.get("defaults"), name=p.get("name", "external"))
        state = cls(problem, doc["mode"], doc["seed"])
        # baselines are finite once resolved, so null means "not yet measured"
        state.baseline_runtime = doc.get("baseline_runtime")
        state.baseline_metric = doc.get("baseline_metric")
        for od in doc["observations"]:
            obs = Observation(
                iteration=od["iteration"], params=od["params"],
                x=np.asarray(od["x"], dtype=float),
                raw_runtime=od["raw_runtime"],
                raw_metric=_nan_float(od["raw_metric"]),
                objective=od["objective"], constraint=od["constraint"],
                failed=od["failed"], clamped=od.get("clamped", False),
                acquisition=od.get("acquisition"))
            state.observations.append(obs)
            if obs.feasible and (state.incumbent is None
                                 or obs.objective < state.incumbent.objective):
                state.incumbent = obs
        return state


def _json_float(v):
    """NaN/inf are not valid strict JSON; store them as null."""
    if v is None or not math.isfinite(v):
        return None
    return v


def _nan_float(v) -> float:
    return float("nan") if v is None else float(v)


def _obs_to_doc(o: Observation) -> dict[str, Any]:
    return {
        "iteration": o.iteration,
        "params": o.params,
        "x": [float(v) for v in o.x],
        "raw_runtime": _json_float(o.raw_runtime),
        "raw_metric": _json_float(o.raw_metric),
        "objective": _json_float(o.objective),
        "constraint": _json_float(o.constraint),
        "failed": o.failed,
        "clamped": o.clamped,
        "acquisition": _json_float(o.acquisition),
    }


# -- full trial ---------------------------------------------------------------

@dataclass
class TrialRecord:
    """One trace row: the observation plus running aggregates."""

    iteration: int
    params: dict[str, Any]
    x: list[float]
    acquisition: float | None
    runtime_seconds: float | None
    metric: float
    objective: float | None
    constraint: float | None
    failed: bool
    clamped: bool
    feasible: bool
    cumulative_runtime: float
    best_metric: float          # best raw metric over all successes so far
    best_metric_feasible: bool  # whether that best metric meets the threshold
    incumbent_iteration: int | None
    incumbent_runtime: float | None
    incumbent_metric: float | None


@dataclass
class TrialTrace:
    """Complete per-iteration record of one (mode, seed) run."""

    mode: str
    seed: int
    problem_name: str
    task: str
    threshold: float
    budget: int
    n_init: int
    baseline_runtime: float | None
    baseline_metric: float | None
    records: list[TrialRecord] = field(default_factory=list)

    def final_selection(self) -> TrialRecord | None:
        """The answer this run reports in comparisons.

        cbo answers with its feasible incumbent; penalized_bo answers with
        the lowest-runtime trial regardless of feasibility, which is what
        an unconstrained optimizer hands back. Falls back to the latter
        when cbo never found a feasible point.
        """
        last = self.records[-1] if self.records else None
        if last is None:
            return None
        if self.mode == "cbo" and last.incumbent_iteration is not None:
            return self.records[last.incumbent_iteration]
        ok = [r for r in self.records if not r.failed]
        if not ok:
            return None
        return min(ok, key=lambda r: (r.runtime_seconds, r.iteration))


def run(problem: ProblemSpec, mode: str, seed: int,
        evaluator: Callable[[Mapping[str, Any]], "EvaluationResult"]) -> TrialTrace:
    """Execute ask/tell until the budget is exhausted.

    Evaluator failures become failed observations; the loop always runs to
    budget. Returns the full trace, including cumulative runtime and the
    running best metric driving the benchmark plots.
    """
    state = OptimizerState(problem, mode, seed)
    trace = TrialTrace(
        mode=mode, seed=seed, problem_name=problem.name, task=problem.task,
        threshold=problem.threshold, budget=problem.budget,
        n_init=problem.resolved_n_init,
        baseline_runtime=problem.baseline_runtime,
        baseline_metric=problem.baseline_metric)

    cumulative = 0.0
    best_metric = float("nan")
    for _ in range(problem.budget):
        values = state.ask()
        try:
            result = evaluator(values)
            runtime, metric = result.runtime_seconds, result.metric
            failed = result.status != "ok"
        except Exception:
            log.exception("evaluator raised; recording a failed observation")
            runtime, metric, failed = None, float("nan"), True
        obs = state.tell(values, runtime, metric, failed=failed)
        if obs.raw_runtime is not None and math.isfinite(obs.raw_runtime):
            cumulative += obs.raw_runtime
        if not obs.failed:
            if math.isnan(best_metric):
                best_metric = obs.raw_metric
            elif problem.task == "regression":
                best_metric = min(best_metric, obs.raw_metric)
            else:
                best_metric = max(best_metric, obs.raw_metric)
        inc = state.incumbent
        trace.records.append(TrialRecord(
            iteration=obs.iteration, params=obs.params, x=[float(v) for v in obs.x],
            acquisition=obs.acquisition, runtime_seconds=obs.raw_runtime,
            metric=obs.raw_metric, objective=obs.objective,
            constraint=obs.constraint, failed=obs.failed, clamped=obs.clamped,
            feasible=obs.feasible, cumulative_runtime=cumulative,
            best_metric=best_metric,
            best_metric_feasible=(not math.isnan(best_metric))
            and is_feasible_raw(problem.task, best_metric, problem.threshold),
            incumbent_iteration=inc.iteration if inc else None,
            incumbent_runtime=inc.raw_runtime if inc else None,
            incumbent_metric=inc.raw_metric if inc else None))

    trace.baseline_runtime = state.baseline_runtime
    trace.baseline_metric = state.baseline_metric
    return trace

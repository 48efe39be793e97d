"""Benchmark harness CLI: run trials, extract plot data, summarize.

Subcommands:

* ``run <config.json>`` — execute every configured (mode, seed) trial,
  writing one JSONL trace per trial plus a CSV + text summary.
* ``plotdata <trace...> --out CSV`` — flatten traces into per-iteration
  rows (best metric so far, cumulative runtime) ready for any plotting tool.
* ``report <summary.csv>`` — aggregate the summary across seeds per mode,
  with violation markers.

Set ECOBO_LOG_LEVEL (DEBUG/INFO/WARNING/ERROR) to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from . import evaluators, optimizer
from .optimizer import ProblemSpec, TrialTrace, is_feasible_raw
from .space import space_from_config

log = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = "1.0"
SUMMARY_MAGIC = "# ecobo-summary v1.0"
SUMMARY_FIELDS = ("mode", "seed", "best_trial_runtime", "cumulative_runtime",
                  "incumbent_metric", "feasible")


class ConfigError(ValueError):
    """Config file is syntactically or semantically invalid."""


# -- run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    problem_name: str
    problem: ProblemSpec | None          # synthetic problems build per run
    synthetic: evaluators.SyntheticProblem | None
    external: dict[str, Any] | None
    modes: list[str]
    seeds: list[int]
    budget: int
    n_init: int | None
    out_dir: Path


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{where}: {msg}")


def parse_config(path: Path) -> RunConfig:
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc

    _require(isinstance(doc, dict), str(path), "top level must be an object")
    problem = doc.get("problem")
    _require(isinstance(problem, dict), f"{path}: problem", "must be an object")

    budget = doc.get("budget", 50)
    _require(isinstance(budget, int) and budget >= 3, f"{path}: budget",
             "must be an integer >= 3")
    n_init = doc.get("n_init")
    _require(n_init is None or (isinstance(n_init, int) and n_init >= 2),
             f"{path}: n_init", "must be an integer >= 2")
    modes = doc.get("modes", list(optimizer.MODES))
    _require(isinstance(modes, list) and modes, f"{path}: modes",
             "must be a non-empty list")
    for m in modes:
        _require(m in optimizer.MODES, f"{path}: modes",
                 f"unknown mode {m!r}; expected one of {list(optimizer.MODES)}")
    seeds = doc.get("seeds", [0])
    _require(isinstance(seeds, list) and seeds
             and all(isinstance(s, int) for s in seeds),
             f"{path}: seeds", "must be a non-empty list of integers")
    out_dir = Path(doc.get("out_dir", "ecobo_results"))

    if "synthetic" in problem:
        name = problem["synthetic"]
        _require(name in evaluators.SYNTHETIC_PROBLEMS, f"{path}: problem.synthetic",
                 f"unknown problem {name!r}; bundled: "
                 f"{sorted(evaluators.SYNTHETIC_PROBLEMS)}")
        return RunConfig(problem_name=name, problem=None,
                         synthetic=evaluators.SYNTHETIC_PROBLEMS[name],
                         external=None, modes=modes, seeds=seeds,
                         budget=budget, n_init=n_init, out_dir=out_dir)

    _require("external" in problem, f"{path}: problem",
             'needs either "synthetic" or "external"')
    ext = problem["external"]
    where = f"{path}: problem.external"
    _require(isinstance(ext, dict), where, "must be an object")
    for key in ("command", "space", "task", "threshold"):
        _require(key in ext, where, f"missing required key {key!r}")
    _require(isinstance(ext["threshold"], (int, float)) and ext["threshold"] > 0,
             f"{where}.threshold", "must be a positive number")
    try:
        space = space_from_config(ext["space"])
    except Exception as exc:
        raise ConfigError(f"{where}.space: {exc}") from exc
    try:
        spec = ProblemSpec(
            task=ext["task"], threshold=float(ext["threshold"]), space=space,
            budget=budget, n_init=n_init,
            baseline_runtime=ext.get("baseline_runtime"),
            baseline_metric=ext.get("baseline_metric"),
            defaults=ext.get("defaults"), name="external")
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return RunConfig(problem_name="external", problem=spec, synthetic=None,
                     external=ext, modes=modes, seeds=seeds, budget=budget,
                     n_init=n_init, out_dir=out_dir)


# -- trace serialization ------------------------------------------------------

def _jf(v):
    """Floats for strict JSON: NaN/inf become null."""
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def trace_path(out_dir: Path, mode: str, seed: int) -> Path:
    return out_dir / f"trace_{mode}_seed{seed}.jsonl"


def write_trace(path: Path, trace: TrialTrace) -> None:
    header = {
        "record": "header",
        "schema_version": TRACE_SCHEMA_VERSION,
        "mode": trace.mode,
        "seed": trace.seed,
        "problem": trace.problem_name,
        "task": trace.task,
        "threshold": trace.threshold,
        "budget": trace.budget,
        "n_init": trace.n_init,
        "baseline_runtime": _jf(trace.baseline_runtime),
        "baseline_metric": _jf(trace.baseline_metric),
    }
    with path.open("w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in trace.records:
            row = {
                "record": "observation",
                "iteration": r.iteration,
                "params": r.params,
                "x": r.x,
                "acquisition": _jf(r.acquisition),
                "runtime_seconds": _jf(r.runtime_seconds),
                "metric": _jf(r.metric),
                "objective": _jf(r.objective),
                "constraint": _jf(r.constraint),
                "failed": r.failed,
                "clamped": r.clamped,
                "feasible": r.feasible,
                "cumulative_runtime": _jf(r.cumulative_runtime),
                "best_metric": _jf(r.best_metric),
                "best_metric_feasible": r.best_metric_feasible,
                "incumbent_iteration": r.incumbent_iteration,
                "incumbent_runtime": _jf(r.incumbent_runtime),
                "incumbent_metric": _jf(r.incumbent_metric),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_trace(path: Path) -> tuple[dict, list[dict], int]:
    """Parse one trace file; returns (header, records, malformed-line count)."""
    header = None
    records = []
    warnings = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                kind = doc["record"]
            except (json.JSONDecodeError, TypeError, KeyError) as exc:
                log.warning("%s:%d: skipping malformed line (%s)", path, lineno, exc)
                warnings += 1
                continue
            if kind == "header":
                version = str(doc.get("schema_version", ""))
                if version.split(".")[0] != TRACE_SCHEMA_VERSION.split(".")[0]:
                    raise ValueError(
                        f"{path}: unsupported trace schema version {version!r}")
                header = doc
            elif kind == "observation":
                records.append(doc)
            else:
                log.warning("%s:%d: unknown record kind %r", path, lineno, kind)
                warnings += 1
    if header is None:
        raise ValueError(f"{path}: missing header line")
    return header, records, warnings


# -- run ----------------------------------------------------------------------

def _comparison_row(trace: TrialTrace) -> dict[str, Any]:
    sel = trace.final_selection()
    last = trace.records[-1] if trace.records else None
    cumulative = last.cumulative_runtime if last else float("nan")
    if sel is None:
        return {"mode": trace.mode, "seed": trace.seed,
                "best_trial_runtime": float("nan"),
                "cumulative_runtime": cumulative,
                "incumbent_metric": float("nan"), "feasible": False}
    return {
        "mode": trace.mode,
        "seed": trace.seed,
        "best_trial_runtime": sel.runtime_seconds,
        "cumulative_runtime": cumulative,
        "incumbent_metric": sel.metric,
        "feasible": is_feasible_raw(trace.task, sel.metric, trace.threshold),
    }


def _run_one(cfg: RunConfig, mode: str, seed: int) -> TrialTrace:
    if cfg.synthetic is not None:
        prob = cfg.synthetic
        problem = ProblemSpec(task=prob.task, threshold=prob.threshold,
                              space=prob.space, budget=cfg.budget,
                              n_init=cfg.n_init, name=prob.name)
        evaluator = evaluators.make_synthetic_evaluator(prob, seed=seed)
    else:
        problem = cfg.problem
        ext = cfg.external
        evaluator = evaluators.ExternalEvaluator(
            ext["command"], timeout=ext.get("timeout_seconds"),
            timeout_factor=ext.get("timeout_factor", 10.0))
    log.info("running %s seed=%d on %s (budget %d)", mode, seed,
             cfg.problem_name, problem.budget)
    return optimizer.run(problem, mode, seed, evaluator)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = parse_config(Path(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    if args.seeds is not None:
        cfg.seeds = args.seeds
    if args.budget is not None:
        cfg.budget = args.budget
        if cfg.problem is not None:
            cfg.problem = ProblemSpec(
                task=cfg.problem.task, threshold=cfg.problem.threshold,
                space=cfg.problem.space, budget=args.budget,
                n_init=cfg.problem.n_init,
                baseline_runtime=cfg.problem.baseline_runtime,
                baseline_metric=cfg.problem.baseline_metric,
                defaults=cfg.problem.defaults, name=cfg.problem.name)

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(mode, seed) for mode in cfg.modes for seed in cfg.seeds]

    # wallclock integrity: external evaluations must never run concurrently
    workers = 1 if cfg.external is not None else max(1, args.workers)
    traces: dict[tuple[str, int], TrialTrace] = {}
    if workers == 1:
        for mode, seed in jobs:
            traces[(mode, seed)] = _run_one(cfg, mode, seed)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {(mode, seed): pool.submit(_run_one, cfg, mode, seed)
                       for mode, seed in jobs}
        traces = {key: fut.result() for key, fut in futures.items()}

    rows = []
    for mode, seed in jobs:
        trace = traces[(mode, seed)]
        path = trace_path(cfg.out_dir, mode, seed)
        write_trace(path, trace)
        rows.append(_comparison_row(trace))

    summary_csv = cfg.out_dir / "summary.csv"
    with summary_csv.open("w", newline="") as fh:
        fh.write(SUMMARY_MAGIC + "\n")
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    summary_txt = cfg.out_dir / "summary.txt"
    summary_txt.write_text(_format_rows(rows))

    print(_format_rows(rows))
    print(f"{len(jobs)} trial(s) written to {cfg.out_dir}")
    return 0


def _format_rows(rows: list[dict[str, Any]]) -> str:
    head = f"{'mode':<13} {'seed':>5} {'best time':>12} {'cum. time':>12} {'metric':>12}  constraint"
    lines = [head, "-" * len(head)]
    for r in rows:
        marker = "ok" if r["feasible"] else "VIOLATED"
        lines.append(
            f"{r['mode']:<13} {r['seed']:>5} {r['best_trial_runtime']:>12.4g} "
            f"{r['cumulative_runtime']:>12.4g} {r['incumbent_metric']:>12.4g}  {marker}")
    return "\n".join(lines)


# -- plotdata -----------------------------------------------------------------

def cmd_plotdata(args: argparse.Namespace) -> int:
    total_warnings = 0
    out_rows = []
    for tp in args.traces:
        try:
            header, records, warnings = read_trace(Path(tp))
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        total_warnings += warnings
        for r in records:
            try:
                out_rows.append({
                    "iteration": r["iteration"],
                    "incumbent_metric": r["best_metric"],
                    "cumulative_runtime": r["cumulative_runtime"],
                    "feasible": r["best_metric_feasible"],
                    "mode": header["mode"],
                    "seed": header["seed"],
                })
            except KeyError as exc:
                log.warning("%s: record missing %s; skipped", tp, exc)
                total_warnings += 1
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=(
            "iteration", "incumbent_metric", "cumulative_runtime",
            "feasible", "mode", "seed"))
        writer.writeheader()
        for row in out_rows:
            writer.writerow(row)
    print(f"wrote {len(out_rows)} rows to {args.out} ({total_warnings} warning(s))")
    return 0


# -- report -------------------------------------------------------------------

def _read_summary(path: Path) -> list[dict[str, Any]]:
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# ecobo-summary"):
        raise ValueError(f"{path}: not an ecobo summary file")
    version = lines[0].rsplit("v", 1)[-1]
    if version.split(".")[0] != "1":
        raise ValueError(f"{path}: unsupported summary version {version!r}")
    rows = []
    for row in csv.DictReader(lines[1:]):
        rows.append({
            "mode": row["mode"],
            "seed": int(row["seed"]),
            "best_trial_runtime": float(row["best_trial_runtime"]),
            "cumulative_runtime": float(row["cumulative_runtime"]),
            "incumbent_metric": float(row["incumbent_metric"]),
            "feasible": row["feasible"] == "True",
        })
    return rows


def cmd_report(args: argparse.Namespace) -> int:
    try:
        rows = _read_summary(Path(args.summary))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not rows:
        print("no runs", file=sys.stderr)
        return 1
    by_mode: dict[str, list[dict]] = {}
    for r in rows:
        by_mode.setdefault(r["mode"], []).append(r)

    head = (f"{'mode':<13} {'runs':>5} {'med best time':>14} {'med cum. time':>14} "
            f"{'med metric':>12} {'violation rate':>15}")
    lines = [head, "-" * len(head)]
    for mode in sorted(by_mode):
        rs = by_mode[mode]
        vrate = sum(1 for r in rs if not r["feasible"]) / len(rs)
        marker = "" if vrate == 0 else "  !"
        lines.append(
            f"{mode:<13} {len(rs):>5} "
            f"{statistics.median(r['best_trial_runtime'] for r in rs):>14.4g} "
            f"{statistics.median(r['cumulative_runtime'] for r in rs):>14.4g} "
            f"{statistics.median(r['incumbent_metric'] for r in rs):>12.4g} "
            f"{vrate:>15.2f}{marker}")
    lines.append("('!' marks modes with constraint violations among reported bests)")
    print("\n".join(lines))
    return 0


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ecobo", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute configured trials")
    p_run.add_argument("config", help="JSON run configuration")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--seeds", type=int, nargs="+", help="override seed list")
    p_run.add_argument("--budget", type=int, help="override evaluation budget")
    p_run.add_argument("--workers", type=int, default=1,
                       help="parallel trials for synthetic problems (default 1)")
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plotdata", help="flatten traces to per-iteration CSV")
    p_plot.add_argument("traces", nargs="+", help="trace JSONL files")
    p_plot.add_argument("--out", required=True, help="output CSV path")
    p_plot.set_defaults(func=cmd_plotdata)

    p_rep = sub.add_parser("report", help="aggregate a summary across seeds")
    p_rep.add_argument("summary", help="summary.csv produced by `run`")
    p_rep.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("ECOBO_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

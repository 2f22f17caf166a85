"""End-to-end coalition selection, the benchmark harness, and report files.

One pipeline run: battery filter -> optimizer -> drop solutions over a
threshold or infeasible -> Promethee II pick -> robot state changes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import median
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    BRUTE_FORCE_MAX_N,
    CriteriaWeights,
    Front,
    UndefinedMetricError,
    brute_force_front,
    error_ratio,
    promethee_rank,
    reference_front,
    set_coverage,
    spacing,
)
from .baselines import EvoParams, run_nsga2, run_spea2
from .model import (
    GenerationRanges,
    InvalidInputError,
    Robot,
    RobotState,
    Scenario,
    Thresholds,
    filter_robots,
    generate_scenario,
    load_scenario,
)
from .objectives import DEFAULT_FEASIBILITY_WEIGHTS, Evaluator, Population
from .qmopso import QmopsoParams
from .qmopso import run as run_qmopso
from .timing import TimingBreakdown

log = logging.getLogger(__name__)

ALGORITHMS = ("qmopso", "nsga2", "spea2", "brute")
REPORT_SCHEMA_VERSION = 1
METRICS_SCHEMA = f"coalform.metrics/{REPORT_SCHEMA_VERSION}"
SUMMARY_SCHEMA = f"coalform.summary/{REPORT_SCHEMA_VERSION}"
CSV_COLUMNS = ("schema", "algorithm", "seed", "n", "population", "metric", "value")
TIMING_METRICS = {"pt", "optimizer_time", "filtering_time", "repository_update_time", "feasibility_check_time"}


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "qmopso"
    scenario: Optional[Scenario] = None
    scenario_path: Optional[Path] = None
    generate_n: Optional[int] = None
    ranges: GenerationRanges = GenerationRanges()
    seed: int = 0
    population: int = 100
    iterations: int = 100
    filter_threshold: float = 40.0
    thresholds: Optional[Thresholds] = None   # None: use the task's own
    weights: CriteriaWeights = CriteriaWeights()
    feasibility_weights: tuple[float, float] = DEFAULT_FEASIBILITY_WEIGHTS
    out_dir: Optional[Path] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        sources = sum(x is not None for x in (self.scenario, self.scenario_path, self.generate_n))
        if sources != 1:
            raise InvalidInputError("give exactly one scenario source (scenario, file, or generator size)")
        if not 0 <= self.filter_threshold <= 100:
            raise InvalidInputError("filter threshold must be a percentage")
        if self.population < 2 or self.iterations < 0:
            raise InvalidInputError("population must be >= 2 and iterations >= 0")

    def load(self) -> Scenario:
        if self.scenario is not None:
            return self.scenario
        if self.scenario_path is not None:
            return load_scenario(self.scenario_path)
        return generate_scenario(self.seed, self.generate_n, self.ranges)

    def echo(self) -> dict:
        th = self.thresholds
        return {
            "algorithm": self.algorithm,
            "scenario": str(self.scenario_path) if self.scenario_path else
                        (f"generated n={self.generate_n}" if self.generate_n else "in-memory"),
            "seed": self.seed,
            "population": self.population,
            "iterations": self.iterations,
            "filter_threshold": self.filter_threshold,
            "thresholds": None if th is None else [_json_num(th.max_time), _json_num(th.max_cost),
                                                   _json_num(th.max_robots)],
            "weights": [self.weights.time, self.weights.cost, self.weights.size],
            "feasibility_weights": list(self.feasibility_weights),
        }


@dataclass
class RunResult:
    status: str                               # "ok" or "no-feasible-coalition"
    selected: Optional[list[int]]             # original robot ids
    selected_index: Optional[int]             # row of ``pareto`` that was picked
    pareto: Population                        # optimizer output, filtered-robot space
    member_ids: list[int]                     # filtered row k -> original robot id
    kept: np.ndarray                          # rows surviving thresholds + feasibility
    timing: TimingBreakdown
    provenance: dict = field(default_factory=dict)

    @property
    def feasible_found(self) -> bool:
        return self.status == "ok"

    def coalition_ids(self, row: int) -> list[int]:
        return [self.member_ids[k] for k in np.flatnonzero(self.pareto.positions[row])]


def optimize(scenario: Scenario, algorithm: str, population: int, iterations: int, seed: int,
             weights: CriteriaWeights = CriteriaWeights(),
             feasibility_weights=DEFAULT_FEASIBILITY_WEIGHTS) -> tuple[Population, TimingBreakdown]:
    """Run one optimizer and return its output front with timings."""
    if algorithm == "qmopso":
        res = run_qmopso(scenario, QmopsoParams(population=population, iterations=iterations, weights=weights,
                                                feasibility_weights=feasibility_weights, seed=seed))
        return res.front, res.timing
    if algorithm in ("nsga2", "spea2"):
        params = EvoParams(population=population, generations=iterations,
                           feasibility_weights=feasibility_weights, seed=seed)
        res = (run_nsga2 if algorithm == "nsga2" else run_spea2)(scenario, params)
        return res.front, res.timing
    if algorithm == "brute":
        start = time.perf_counter()
        front = brute_force_front(scenario, feasibility_weights)
        pop = Evaluator(scenario, feasibility_weights).evaluate(front.positions.reshape(-1, scenario.n))
        return pop, TimingBreakdown(total=time.perf_counter() - start)
    raise InvalidInputError(f"unknown algorithm {algorithm!r}")


def select_coalition(front: Population, thresholds: Thresholds,
                     weights: CriteriaWeights = CriteriaWeights()) -> tuple[Optional[int], np.ndarray]:
    """Row index of the chosen solution (or None) and the surviving-row mask.

    Solutions strictly above any threshold, and infeasible ones, are dropped;
    the rest are ranked when more than one remains.
    """
    objs = front.objectives
    limits = np.array([thresholds.max_time, thresholds.max_cost, thresholds.max_robots])
    kept = front.feasible & np.all(objs <= limits, axis=1) if len(front) else np.zeros(0, dtype=bool)
    rows = np.flatnonzero(kept)
    if len(rows) == 0:
        return None, kept
    if len(rows) == 1:
        return int(rows[0]), kept
    return int(rows[promethee_rank(objs[rows], weights).order[0]]), kept


def run_pipeline(config: RunConfig, scenario: Optional[Scenario] = None) -> RunResult:
    """One coalition-formation request.

    Robot states in ``scenario`` change in place: only Idle robots take part,
    the chosen members end Busy and every other participant returns to Idle.
    """
    scenario = scenario or config.load()
    thresholds = config.thresholds or scenario.task.thresholds

    t0 = time.perf_counter()
    idle = [rb for rb in scenario.robots if rb.state is RobotState.IDLE]
    filtered = filter_robots(idle, config.filter_threshold)
    filtering = time.perf_counter() - t0

    for rb in filtered:
        rb.transition(RobotState.ALLOCATED)
    ids = [rb.id for rb in filtered]
    try:
        if filtered:
            sub = scenario.subset(ids)
            front, timing = optimize(sub, config.algorithm, config.population, config.iterations, config.seed,
                                     config.weights, config.feasibility_weights)
        else:
            front, timing = Population.empty(0), TimingBreakdown()
        t1 = time.perf_counter()
        row, kept = select_coalition(front, thresholds, config.weights)
        timing.selection = time.perf_counter() - t1
    except Exception:
        for rb in filtered:
            rb.transition(RobotState.IDLE)
        raise
    timing.filtering = filtering

    chosen = set()
    if row is not None:
        chosen = {ids[k] for k in np.flatnonzero(front.positions[row])}
    for rb in filtered:
        rb.transition(RobotState.BUSY if rb.id in chosen else RobotState.IDLE)

    return RunResult(
        status="ok" if row is not None else "no-feasible-coalition",
        selected=sorted(chosen) if row is not None else None,
        selected_index=row,
        pareto=front,
        member_ids=ids,
        kept=kept,
        timing=timing,
        provenance={"config": config.echo(), "scenario_seed": scenario.seed, "n": scenario.n,
                    "filtered_n": len(ids)},
    )


class Fleet:
    """A scenario whose robots serve several requests in turn.

    Busy robots are skipped by later runs, so coalitions selected while
    others are still active never share a member.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.active: list[list[int]] = []

    def request(self, config: RunConfig) -> RunResult:
        result = run_pipeline(config, self.scenario)
        if result.selected:
            self.active.append(result.selected)
        return result

    def release(self, coalition: Sequence[int]) -> None:
        coalition = sorted(coalition)
        if coalition not in self.active:
            raise InvalidInputError("no active coalition with those members")
        self.active.remove(coalition)
        for rid in coalition:
            self.scenario.robots[rid].transition(RobotState.IDLE)


# -- benchmark ---------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    """Grid of runs.  ``qmopso-nofilter`` runs the swarm on the unfiltered fleet."""

    algorithms: tuple[str, ...] = ("qmopso", "nsga2", "spea2")
    sizes: tuple[int, ...] = (10,)
    seeds: tuple[int, ...] = (0, 1, 2)
    populations: tuple[int, ...] = (100,)
    iterations: int = 100
    filter_threshold: Optional[float] = 40.0
    brute_limit: int = 16
    weights: CriteriaWeights = CriteriaWeights()
    ranges: GenerationRanges = GenerationRanges()

    def __post_init__(self):
        for a in self.algorithms:
            if a not in ALGORITHMS + ("qmopso-nofilter",):
                raise InvalidInputError(f"unknown algorithm {a!r}")
        if self.brute_limit > BRUTE_FORCE_MAX_N:
            raise InvalidInputError(f"brute-force limit cannot exceed {BRUTE_FORCE_MAX_N}")


@dataclass
class CellResult:
    algorithm: str
    seed: int
    n: int
    population: int
    metrics: dict[str, float]


def _filtered(scenario: Scenario, threshold: Optional[float]) -> tuple[Scenario, float]:
    if threshold is None:
        return scenario, 0.0
    t0 = time.perf_counter()
    kept = filter_robots(scenario.robots, threshold)
    elapsed = time.perf_counter() - t0
    return scenario.subset([rb.id for rb in kept]), elapsed


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except UndefinedMetricError:
        return math.nan


def run_benchmark(spec: BenchmarkSpec) -> list[CellResult]:
    results: list[CellResult] = []
    for n in spec.sizes:
        for population in spec.populations:
            for seed in spec.seeds:
                results.extend(_run_cell(spec, n, population, seed))
    results.sort(key=lambda c: (c.algorithm, c.n, c.seed, c.population))
    return results


def _run_cell(spec: BenchmarkSpec, n: int, population: int, seed: int) -> list[CellResult]:
    base = generate_scenario(seed, n, spec.ranges)
    filtered, filter_time = _filtered(base, spec.filter_threshold)
    fronts: dict[str, Front] = {}
    metrics: dict[str, dict[str, float]] = {}
    for alg in spec.algorithms:
        scenario, ftime = (base, 0.0) if alg == "qmopso-nofilter" else (filtered, filter_time)
        name = "qmopso" if alg == "qmopso-nofilter" else alg
        try:
            if scenario.n == 0:
                raise InvalidInputError("no robot passed the battery filter")
            pop, timing = optimize(scenario, name, population, spec.iterations, seed, spec.weights)
        except Exception as exc:  # one failed cell must not stop the suite
            log.warning("cell %s n=%d pop=%d seed=%d failed: %s", alg, n, population, seed, exc)
            metrics[alg] = {"failed": 1.0}
            continue
        timing.filtering = ftime
        fronts[alg] = Front.from_population(pop)
        metrics[alg] = {**timing.summary(), "front_size": float(len(fronts[alg]))}

    reference = None
    if 0 < filtered.n <= spec.brute_limit:
        reference = brute_force_front(filtered)
        reference = reference if len(reference) else None
    elif fronts:
        reference = _safe(reference_front, list(fronts.values()))
        reference = None if isinstance(reference, float) else reference

    for alg, front in fronts.items():
        m = metrics[alg]
        m["error_ratio"] = _safe(error_ratio, front, reference) if reference is not None else math.nan
        m["spacing"] = _safe(spacing, front)
        for other, other_front in fronts.items():
            if other != alg:
                m[f"set_coverage:{other}"] = _safe(set_coverage, front, other_front)
    return [CellResult(alg, seed, n, population, m) for alg, m in metrics.items()]


def summarize(results: Sequence[CellResult]) -> dict[tuple[str, int, int, str], float]:
    """Median over seeds of every metric, keyed by (algorithm, n, population, metric)."""
    groups: dict[tuple[str, int, int, str], list[float]] = {}
    for cell in results:
        for metric, value in cell.metrics.items():
            groups.setdefault((cell.algorithm, cell.n, cell.population, metric), []).append(value)
    out = {}
    for key, values in sorted(groups.items()):
        finite = [v for v in values if not math.isnan(v)]
        out[key] = median(finite) if finite else math.nan
    return out


# -- reports -----------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _json_num(x: float):
    return x if math.isfinite(x) else None


def metrics_csv(results: Sequence[CellResult], include_timing: bool = True) -> str:
    """One metric per row, rows sorted by (algorithm, n, seed, population, metric).

    The first column carries the schema tag, so an empty run list yields the
    header line alone.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for cell in sorted(results, key=lambda c: (c.algorithm, c.n, c.seed, c.population)):
        for metric in sorted(cell.metrics):
            if not include_timing and metric in TIMING_METRICS:
                continue
            writer.writerow([METRICS_SCHEMA, cell.algorithm, cell.seed, cell.n, cell.population, metric, _fmt(cell.metrics[metric])])
    return buf.getvalue()


def summary_csv(results: Sequence[CellResult], include_timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("schema", "algorithm", "n", "population", "metric", "median"))
    for (alg, n, pop, metric), value in summarize(results).items():
        if include_timing or metric not in TIMING_METRICS:
            writer.writerow([SUMMARY_SCHEMA, alg, n, pop, metric, _fmt(value)])
    return buf.getvalue()


def benchmark_json(results: Sequence[CellResult], include_timing: bool = True) -> dict:
    cells = []
    for cell in sorted(results, key=lambda c: (c.algorithm, c.n, c.seed, c.population)):
        metrics = {k: _json_num(v) for k, v in sorted(cell.metrics.items())
                   if include_timing or k not in TIMING_METRICS}
        cells.append({"algorithm": cell.algorithm, "seed": cell.seed, "n": cell.n,
                      "population": cell.population, "metrics": metrics})
    summary = [
        {"algorithm": a, "n": n, "population": p, "metric": m, "median": _json_num(v)}
        for (a, n, p, m), v in summarize(results).items()
        if include_timing or m not in TIMING_METRICS
    ]
    return {"schema_version": REPORT_SCHEMA_VERSION, "kind": "benchmark", "cells": cells, "summary": summary}


RUN_RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "coalform run result",
    "type": "object",
    "required": ["schema_version", "kind", "status", "selected", "pareto", "provenance"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "run"},
        "status": {"enum": ["ok", "no-feasible-coalition"]},
        "selected": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["robots", "time", "cost", "size"],
                    "properties": {
                        "robots": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                        "time": {"type": "number"},
                        "cost": {"type": "number"},
                        "size": {"type": "integer"},
                    },
                },
            ]
        },
        "pareto": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["robots", "time", "cost", "size", "sat_treq", "sat_c", "degree", "feasible", "kept"],
                "properties": {
                    "robots": {"type": "array", "items": {"type": "integer"}},
                    "time": {"type": ["number", "null"]},
                    "cost": {"type": "number"},
                    "size": {"type": "integer"},
                    "sat_treq": {"type": "number", "minimum": 0, "maximum": 1},
                    "sat_c": {"type": "number", "minimum": 0, "maximum": 1},
                    "degree": {"type": "number", "minimum": 0, "maximum": 1},
                    "feasible": {"type": "boolean"},
                    "kept": {"type": "boolean"},
                },
            },
        },
        "timing": {"type": "object"},
        "provenance": {"type": "object", "required": ["config"]},
    },
}


def run_result_json(result: RunResult, include_timing: bool = True) -> dict:
    pop = result.pareto
    pareto = []
    for i in range(len(pop)):
        obj, rep = pop.objective_vector(i), pop.report(i)
        pareto.append({
            "robots": result.coalition_ids(i), "time": _json_num(obj.time), "cost": obj.cost, "size": obj.size,
            "sat_treq": rep.sat_treq, "sat_c": rep.sat_c, "degree": rep.degree, "feasible": rep.feasible,
            "kept": bool(result.kept[i]),
        })
    selected = None
    if result.selected_index is not None:
        obj = pop.objective_vector(result.selected_index)
        selected = {"robots": result.selected, "time": obj.time, "cost": obj.cost, "size": obj.size}
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "run",
        "status": result.status,
        "selected": selected,
        "pareto": pareto,
        "provenance": result.provenance,
    }
    if include_timing:
        t = result.timing
        doc["timing"] = {**t.summary(), "selection_time": t.selection,
                         "repository_update_per_iteration": t.repository_update,
                         "feasibility_check_per_iteration": t.feasibility_check}
    return doc


def run_result_csv(result: RunResult, include_timing: bool = True) -> str:
    """The single run as metric rows (same columns as the benchmark CSV)."""
    cfg = result.provenance["config"]
    metrics = {"status_ok": 1.0 if result.status == "ok" else 0.0, "pareto_size": float(len(result.pareto)),
               "kept_size": float(result.kept.sum())}
    if result.selected_index is not None:
        t, c, s = result.pareto.objectives[result.selected_index]
        metrics.update(selected_time=t, selected_cost=c, selected_size=s)
    if include_timing:
        metrics.update(result.timing.summary())
    cell = CellResult(cfg["algorithm"], cfg["seed"], result.provenance["n"], cfg["population"], metrics)
    return metrics_csv([cell], include_timing)


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror}") from exc


def emit_report(results, out_dir: Path, fmt: str = "csv", include_timing: bool = True) -> list[Path]:
    """Write a run result or benchmark cells to ``out_dir``; returns the files written."""
    out_dir = Path(out_dir)
    if fmt not in ("csv", "json"):
        raise InvalidInputError("format must be csv or json")
    written = []
    if isinstance(results, RunResult):
        if fmt == "json":
            path = out_dir / "run.json"
            _write(path, json.dumps(run_result_json(results, include_timing), indent=2, sort_keys=True) + "\n")
        else:
            path = out_dir / "run.csv"
            _write(path, run_result_csv(results, include_timing))
        return [path]
    results = list(results)
    if fmt == "json":
        path = out_dir / "benchmark.json"
        _write(path, json.dumps(benchmark_json(results, include_timing), indent=2, sort_keys=True) + "\n")
        written.append(path)
    else:
        for name, text in (("metrics.csv", metrics_csv(results, include_timing)),
                           ("summary.csv", summary_csv(results, include_timing))):
            _write(out_dir / name, text)
            written.append(out_dir / name)
    return written

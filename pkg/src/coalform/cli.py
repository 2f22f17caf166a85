"""Command line: ``coalform solve|bench|gen|oracle``.

Exit status is 0 on success, 2 when no coalition passes feasibility and the
thresholds, and 1 on any error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .analysis import CriteriaWeights, brute_force_front
from .model import InvalidInputError, Thresholds, generate_scenario, load_scenario, save_scenario
from .pipeline import ALGORITHMS, BenchmarkSpec, RunConfig, emit_report, run_benchmark, run_pipeline

EXIT_OK, EXIT_ERROR, EXIT_NO_COALITION = 0, 1, 2

log = logging.getLogger("coalform")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _weights(text: str) -> CriteriaWeights:
    try:
        return CriteriaWeights.parse(text)
    except (ValueError, InvalidInputError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", type=Path, help="scenario JSON file")
    p.add_argument("--n", type=int, help="generate a scenario with this many robots instead of loading one")
    p.add_argument("--seed", type=int, default=0, help="single source of randomness (default 0)")


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="directory for report files (default: print to stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock figures so output is reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coalform", description="Multi-robot coalition formation solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="select one coalition for a task")
    _scenario_args(solve)
    solve.add_argument("--algorithm", choices=ALGORITHMS, default="qmopso")
    solve.add_argument("--population", type=int, default=100)
    solve.add_argument("--iterations", type=int, default=100)
    solve.add_argument("--filter-threshold", type=float, default=40.0, help="minimum battery percent")
    solve.add_argument("--max-time", type=float)
    solve.add_argument("--max-cost", type=float)
    solve.add_argument("--max-robots", type=float)
    solve.add_argument("--weights", type=_weights, default=CriteriaWeights(), help="time,cost,size importance")
    _output_args(solve)

    bench = sub.add_parser("bench", help="run a benchmark grid and report metrics")
    bench.add_argument("--algorithms", default="qmopso,nsga2,spea2",
                       help="comma list from qmopso, qmopso-nofilter, nsga2, spea2")
    bench.add_argument("--sizes", type=_int_list, default=(10,))
    bench.add_argument("--seeds", type=_int_list, default=(0, 1, 2))
    bench.add_argument("--seed", type=int, help="shorthand for a single seed")
    bench.add_argument("--populations", type=_int_list, default=(100,))
    bench.add_argument("--population", type=int, help="shorthand for a single population size")
    bench.add_argument("--iterations", type=int, default=100)
    bench.add_argument("--filter-threshold", type=float, default=40.0, help="negative disables filtering")
    bench.add_argument("--weights", type=_weights, default=CriteriaWeights())
    _output_args(bench)
    bench.set_defaults(format="csv")

    gen = sub.add_parser("gen", help="write a random scenario")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, help="output file (default stdout)")

    oracle = sub.add_parser("oracle", help="exact Pareto front by enumeration (small n)")
    _scenario_args(oracle)
    oracle.add_argument("--out", type=Path, help="output file (default stdout)")
    return parser


def _load(args) -> object:
    if (args.scenario is None) == (args.n is None):
        raise InvalidInputError("give exactly one of --scenario or --n")
    return load_scenario(args.scenario) if args.scenario else generate_scenario(args.seed, args.n)


def _print_files(paths) -> None:
    for p in paths:
        sys.stdout.write(Path(p).read_text())


def _cmd_solve(args) -> int:
    scenario = _load(args)
    base = scenario.task.thresholds
    override = (args.max_time, args.max_cost, args.max_robots)
    thresholds = None
    if any(v is not None for v in override):
        thresholds = Thresholds(*(base_v if v is None else v for v, base_v in
                                  zip(override, (base.max_time, base.max_cost, base.max_robots))))
    config = RunConfig(algorithm=args.algorithm, scenario=scenario, seed=args.seed, population=args.population,
                       iterations=args.iterations, filter_threshold=args.filter_threshold, thresholds=thresholds,
                       weights=args.weights, out_dir=args.out)
    result = run_pipeline(config, scenario)
    result.provenance["config"]["scenario"] = str(args.scenario) if args.scenario else f"generated n={args.n}"
    _emit(result, args)
    if result.status != "ok":
        log.warning("no coalition satisfies feasibility and thresholds")
        return EXIT_NO_COALITION
    return EXIT_OK


def _emit(results, args) -> None:
    if args.out:
        for p in emit_report(results, args.out, args.format, include_timing=not args.no_timing):
            log.info("wrote %s", p)
        return
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        _print_files(emit_report(results, Path(tmp), args.format, include_timing=not args.no_timing))


def _cmd_bench(args) -> int:
    spec = BenchmarkSpec(
        algorithms=tuple(a.strip() for a in args.algorithms.split(",") if a.strip()),
        sizes=args.sizes,
        seeds=(args.seed,) if args.seed is not None else args.seeds,
        populations=(args.population,) if args.population is not None else args.populations,
        iterations=args.iterations,
        filter_threshold=None if args.filter_threshold < 0 else args.filter_threshold,
        weights=args.weights,
    )
    _emit(run_benchmark(spec), args)
    return EXIT_OK


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_gen(args) -> int:
    scenario = generate_scenario(args.seed, args.n)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        from .model import scenario_to_dict

        _write_text(None, json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    scenario = _load(args)
    front = brute_force_front(scenario)
    doc = {
        "schema_version": 1,
        "kind": "oracle",
        "n": scenario.n,
        "feasible": not front.infeasible,
        "front": [
            {"robots": [int(i) for i in pos.nonzero()[0]],
             "time": t if math.isfinite(t) else None, "cost": c, "size": int(s)}
            for pos, (t, c, s) in zip(front.positions, front.objectives.tolist())
        ],
    }
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK if len(front) else EXIT_NO_COALITION


COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "gen": _cmd_gen, "oracle": _cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (InvalidInputError, OSError, ValueError) as exc:
        print(f"coalform: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: solve, sweep, validate and candidates."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from viewcast.candidate_sets import candidate_table
from viewcast.config import ConfigError, RunConfig, get_settings, parse_config
from viewcast.experiments import (
    SCHEMES,
    TrialRecord,
    run_scheme,
    run_sweep,
    summarize,
    write_results,
)
from viewcast.io import get_logger, set_log_level, write_json
from viewcast.logs import log_solve
from viewcast.model import InvalidViewError, multicast_profile
from viewcast.solution import Solution
from viewcast.validation import run_validation

LOGGER = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _load(path: str) -> RunConfig | None:
    try:
        return parse_config(path)
    except (ConfigError, InvalidViewError) as err:
        print(f"error: {err}", file=sys.stderr)
        return None


def _print_solution(solution: Solution) -> None:
    grid = solution.scenario.grid
    diagnostics = solution.diagnostics
    print(f"scheme: {diagnostics.solver} ({diagnostics.wall_ms:.1f} ms)")
    print(f"transmitted: {', '.join(f'{grid.value(g):g}' for g in solution.transmitted_views)}")
    for load in multicast_profile(solution.scenario, solution.selection):
        col = grid.column(load.view)
        print(
            f"  view {grid.value(load.view):g}: t={solution.allocation.t[col]:.6g} s "
            f"p={solution.allocation.p[col]:.6g} W {load.kind} "
            f"direct={list(load.direct_users)} reference={list(load.reference_users)}"
        )
    for key, value in solution.energy.to_dict().items():
        print(f"{key}: {value:.6e}")
    if diagnostics.flags:
        print(f"flags: {';'.join(diagnostics.flags)}")


def _solve(args: argparse.Namespace) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_USAGE
    settings = get_settings()
    options = dataclasses.replace(
        config.options,
        workers=args.workers or settings.WORKERS,
        rho=args.rho if args.rho is not None else config.options.rho,
        tol=args.tol if args.tol is not None else config.options.tol,
        max_iter=args.max_iter if args.max_iter is not None else config.options.max_iter,
    )
    try:
        solution = run_scheme(args.scheme, config.scenario, options)
    except (ValueError, RuntimeError, ArithmeticError) as err:
        LOGGER.error("%s failed on %s: %s", args.scheme, config.source, err)
        info = getattr(err, "info", None)
        if info:
            print(json.dumps(info, indent=2, sort_keys=True, default=str), file=sys.stderr)
        return EXIT_FAILURE

    _print_solution(solution)
    if args.out:
        write_json(args.out, solution.to_dict())
        LOGGER.info("Wrote solution to %s", args.out)
    log_solve(
        scheme=solution.diagnostics.solver,
        energy_j=solution.energy.total,
        wall_ms=solution.diagnostics.wall_ms,
        K=config.scenario.K,
        scenario=config.scenario,
        flags=solution.diagnostics.flags,
        seed=config.experiment.seed if config.experiment.requests is None else None,
        path=Path(settings.RUN_LOG),
    )
    return EXIT_OK


def _sweep(args: argparse.Namespace) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_USAGE
    if config.sweep is None:
        print(f"error: {config.source} has no sweep section", file=sys.stderr)
        return EXIT_USAGE
    settings = get_settings()
    run_log = Path(settings.RUN_LOG)

    def record_trial(record: TrialRecord) -> None:
        log_solve(
            scheme=record.scheme,
            energy_j=record.E_total_J,
            wall_ms=record.solve_ms,
            K=record.K,
            flags=[f for f in record.flags.split(";") if f],
            seed=record.seed,
            path=run_log,
        )

    records = run_sweep(
        config.sweep,
        workers=args.workers or settings.WORKERS,
        options=config.options,
        on_record=record_trial,
    )
    manifest = write_results(records, args.out, config.sweep)
    LOGGER.info("Wrote %d records to %s (manifest %s)", len(records), args.out, manifest)
    print(summarize(records).to_string(index=False))
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    report = run_validation(seed=args.seed, instances=args.instances)
    for result in report.results:
        status = "ok" if result.ok else "FAILED"
        print(f"[{status}] {result.name}: {result.detail} ({result.elapsed_ms:.0f} ms)")
    return EXIT_OK if report.ok else EXIT_FAILURE


def _candidates(args: argparse.Namespace) -> int:
    config = _load(args.config)
    if config is None:
        return EXIT_USAGE
    for row in candidate_table(config.scenario):
        members = ", ".join(f"{v:g}" for v in row["candidates"])
        print(
            f"user {row['user']} requests {row['request']:g}: "
            f"U = {{{members}}} ({row['choices']} choices)"
        )
    return EXIT_OK


COMMANDS = {
    "solve": _solve,
    "sweep": _sweep,
    "validate": _validate,
    "candidates": _candidates,
}


def run(args: argparse.Namespace) -> int:
    try:
        set_log_level(get_settings().LOG_LEVEL)
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return run(args)


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewcast",
        description="Energy-minimal view selection and TDMA allocation for multi-view video.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Solve one scenario with one scheme.")
    solve.add_argument("--config", required=True, help="Experiment YAML file.")
    solve.add_argument("--scheme", default="exact", choices=sorted(SCHEMES), help="Solver.")
    solve.add_argument("--out", help="Write the solution as JSON to this path.")
    solve.add_argument(
        "--workers", type=_positive_int, help="Threads for the exact search (VIEWCAST_WORKERS)."
    )
    solve.add_argument("--rho", type=float, help="Penalty parameter of the dc scheme.")
    solve.add_argument("--tol", type=float, help="Stopping tolerance of the dc scheme.")
    solve.add_argument("--max-iter", type=_positive_int, help="Iteration cap of the dc scheme.")

    sweep = sub.add_parser("sweep", help="Run the sweep section of a config and write a CSV.")
    sweep.add_argument("--config", required=True, help="Experiment YAML file with a sweep.")
    sweep.add_argument("--out", required=True, help="Results CSV path.")
    sweep.add_argument(
        "--workers", type=_positive_int, help="Parallel trials (defaults to VIEWCAST_WORKERS)."
    )

    validate = sub.add_parser("validate", help="Run the self-check suite.")
    validate.add_argument("--seed", type=int, default=0, help="Base seed of random instances.")
    validate.add_argument(
        "--instances", type=_positive_int, default=20, help="Random instances per check."
    )

    candidates = sub.add_parser("candidates", help="Print each user's candidate views.")
    candidates.add_argument("--config", required=True, help="Experiment YAML file.")
    return parser


if __name__ == "__main__":
    raise SystemExit(main())

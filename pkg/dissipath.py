#!/usr/bin/env python3
"""
Command-line interface for dissipath.

Usage:
    dissipath validate <scenario.json>...
    dissipath run <scenario.json>... [--out DIR] [--jobs N]
    dissipath counterexample <scenario.json> [--out DIR] [--trials N]
    dissipath catalog

Exit codes: 0 run complete (inspect the audit status), 1 unexpected error,
2 validation failure, 3 malformed JSON, 4 I/O error.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from config import Config
from constants import EXIT_OK, EXIT_UNEXPECTED, SEPARATOR_WIDTH
from scenario_validator import get_validation_summary, validate_scenario_file
from services import catalog, describe_error, run_counterexample, run_scenario
from validators import DissipathError

logger = logging.getLogger("dissipath")

SEPARATOR = "=" * SEPARATOR_WIDTH


def parse_args(
    argv: Optional[Sequence[str]] = None, config: Optional[Config] = None
) -> argparse.Namespace:
    config = config if config is not None else Config()
    parser = argparse.ArgumentParser(
        prog="dissipath",
        description="Dissipativity-preserving reduction onto manifolds and monotone trees",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="Validate scenario files")
    validate.add_argument("configs", nargs="+", type=Path, help="Scenario JSON files")

    run = commands.add_parser("run", help="Integrate scenarios and write trajectory and audit")
    run.add_argument("configs", nargs="+", type=Path, help="Scenario JSON files")
    run.add_argument("--out", type=Path, default=config.OUTPUT_DIR, help="Output directory")
    run.add_argument(
        "--jobs",
        type=int,
        default=config.JOBS,
        help="Worker processes for several scenario files (each writes to <out>/<stem>/)",
    )

    counterexample = commands.add_parser("counterexample", help="Run the counterexample harness")
    counterexample.add_argument("config", type=Path, help="Scenario JSON file")
    counterexample.add_argument(
        "--out", type=Path, default=config.OUTPUT_DIR, help="Output directory"
    )
    counterexample.add_argument(
        "--trials",
        type=int,
        default=config.TRIALS,
        help="Monte-Carlo trials when the scenario does not set counterexample.trials",
    )

    commands.add_parser("catalog", help="List Lyapunov, chart, field, tree-curve and policy ids")
    return parser.parse_args(argv)


def cmd_validate(paths: List[Path]) -> int:
    """Validate every file; print one JSON report per file to stdout."""
    exit_code = EXIT_OK
    for path in paths:
        try:
            scenario = validate_scenario_file(path)
        except DissipathError as e:
            report = {"file": str(path), "valid": False, **describe_error(e)}
            logger.error("✗ %s: %s", path, e)
            exit_code = max(exit_code, e.code)
        else:
            summary = get_validation_summary(scenario)
            report = {"file": str(path), "valid": True, "summary": summary}
            logger.info("✓ %s (%s, %s)", path, summary["lyapunov"], summary["geometry"])
        print(json.dumps(report))
    return exit_code


def _run_one(path: Path, out_dir: Path) -> Tuple[str, int, Dict]:
    """Validate and run one scenario; returns (file, exit code, audit or error)."""
    try:
        scenario = validate_scenario_file(path)
        result = run_scenario(scenario, out_dir)
    except DissipathError as e:
        logger.error("✗ %s: %s", path, e)
        return str(path), e.code, describe_error(e)
    return str(path), EXIT_OK, result.audit.to_dict()


def _run_worker(path: Path, out_dir: Path) -> Tuple[str, int, Dict]:
    Config().setup_logging()
    return _run_one(path, out_dir)


def cmd_run(paths: List[Path], out_dir: Path, jobs: int) -> int:
    """
    Run scenarios. A single scenario writes into out_dir; several scenarios write into
    out_dir/<file stem>/ and may run in a process pool.
    """
    if len(paths) == 1:
        targets = [(paths[0], out_dir)]
    else:
        targets = [(path, out_dir / path.stem) for path in paths]

    results: List[Tuple[str, int, Dict]] = []
    if jobs > 1 and len(targets) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(_run_worker, path, target) for path, target in targets]
            for future in as_completed(futures):
                results.append(future.result())
    else:
        results = [_run_one(path, target) for path, target in targets]

    logger.info(SEPARATOR)
    exit_code = EXIT_OK
    for file, code, payload in sorted(results):
        exit_code = max(exit_code, code)
        if code == EXIT_OK:
            logger.info("%s: status %s", file, payload["status"])
        else:
            logger.info("%s: failed (%s)", file, payload["reason"])
    logger.info(SEPARATOR)
    return exit_code


def cmd_counterexample(path: Path, out_dir: Path, trials: int) -> int:
    scenario = validate_scenario_file(path)
    report = run_counterexample(scenario, out_dir, default_trials=trials)

    logger.info(SEPARATOR)
    logger.info("Counterexample report: %s", report["name"])
    logger.info(SEPARATOR)
    rank_one = report.get("rank_one")
    if rank_one is not None:
        if rank_one["no_witness"]:
            logger.info("Rank-one: no witness (%s)", rank_one["reason"])
        else:
            logger.info(
                "Rank-one: full %.6g, reduced %.6g at x=%s",
                rank_one["full_dissipation"],
                rank_one["reduced_dissipation"],
                rank_one["witness"],
            )
    for result in report.get("uniqueness", {}).get("results", []):
        logger.info(
            "Tilt %-8g violation %-5s margin %.6g",
            result["tilt"],
            result["violation_found"],
            result["margin"],
        )
    near = report.get("near_equilibrium")
    if near is not None:
        logger.info("Near-equilibrium: %d violations", near["violations"])
    logger.info(SEPARATOR)
    return EXIT_OK


def cmd_catalog() -> int:
    print(json.dumps(catalog(), indent=2))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    CLI entry point.

    Returns:
        Exit code
    """
    config = Config()
    config.setup_logging()
    args = parse_args(argv, config)

    try:
        if args.command == "validate":
            return cmd_validate(args.configs)
        if args.command == "run":
            return cmd_run(args.configs, args.out, max(1, args.jobs))
        if args.command == "counterexample":
            return cmd_counterexample(args.config, args.out, args.trials)
        return cmd_catalog()

    except DissipathError as e:
        logger.error("✗ %s", e)
        return e.code

    except Exception:  # pylint: disable=broad-except
        logger.exception("Unexpected error")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())

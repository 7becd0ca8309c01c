#!/usr/bin/env python3
"""
Standalone script to validate the shipped scenarios.

This script validates every data/scenarios/*.json file against the schema and
performs the semantic checks. Files listed in EXPECTED_FAILURES demonstrate a
rejected configuration: each must fail validation with the listed reason.

Usage:
    python validate_scenarios.py
"""

import logging
import sys
from pathlib import Path

from constants import SEPARATOR_WIDTH
from scenario_validator import get_validation_summary, validate_scenario_file
from validators import DissipathError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(message)s",
)
logger = logging.getLogger(__name__)

EXPECTED_FAILURES = {"circle_radial_quadratic.json": "non-transversal"}


def main() -> int:
    """
    Main validation function.

    Returns:
        Exit code (0 for success, 1 for failure)
    """
    base_dir = Path(__file__).parent
    scenario_dir = base_dir / "data" / "scenarios"
    schema_file = base_dir / "data" / "scenario_schema.json"

    separator = "=" * SEPARATOR_WIDTH
    logger.info(separator)
    logger.info("Scenario Data Validation")
    logger.info(separator)
    logger.info("Scenario directory: %s", scenario_dir)
    logger.info("Schema file: %s", schema_file)
    logger.info("")

    scenario_files = sorted(scenario_dir.glob("*.json"))
    if not scenario_files:
        logger.error("✗ No scenario files found!")
        logger.error(separator)
        return 1

    failures = 0
    for path in scenario_files:
        expected_reason = EXPECTED_FAILURES.get(path.name)
        try:
            scenario = validate_scenario_file(path, schema_file, strict=True)
        except DissipathError as e:
            if expected_reason is not None and e.reason == expected_reason:
                logger.info("✓ %s rejected as expected (%s)", path.name, e.reason)
                continue
            failures += 1
            logger.error("✗ %s", path.name)
            logger.error("%s", str(e))
            logger.error("")
            continue

        if expected_reason is not None:
            failures += 1
            logger.error("✗ %s should fail with %s but passed", path.name, expected_reason)
            continue

        summary = get_validation_summary(scenario)
        logger.info(
            "✓ %s: %s on %s, field %s, policy %s",
            path.name,
            summary["lyapunov"],
            summary["geometry"],
            summary["field"],
            summary["projector_policy"],
        )

    logger.info("")
    logger.info(separator)
    if failures:
        logger.error(
            "%d of %d scenarios failed. Please fix the errors above.", failures, len(scenario_files)
        )
        logger.info(separator)
        return 1
    logger.info("All %d scenarios checked!", len(scenario_files))
    logger.info(separator)
    return 0


if __name__ == "__main__":
    sys.exit(main())

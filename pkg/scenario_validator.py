"""
Scenario validation using JSON Schema.

This module validates scenario files before anything is integrated: first
against the published schema, then semantically (dimensions, positive
definiteness of the metric at the start point, immersion rank,
transversality, tree monotonicity).
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
from jsonschema import Draft7Validator
from jsonschema.exceptions import SchemaError

from lyapunov import metric_at, tol_grad
from manifold import tangent_frame, transversality_in_frame
from services import (
    build_field,
    build_lyapunov,
    build_monotone_tree,
    build_system,
    initial_tree_state,
)
from tree import validate_monotone
from validators import (
    DissipathError,
    ScenarioIOError,
    ScenarioParseError,
    ScenarioValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA_PATH = Path(__file__).parent / "data" / "scenario_schema.json"


def load_schema(schema_path: Path = DEFAULT_SCHEMA_PATH) -> Dict[str, Any]:
    """
    Load JSON schema from file.

    Args:
        schema_path: Path to the schema file

    Returns:
        Schema dictionary

    Raises:
        ScenarioIOError: If the schema file cannot be read
        ScenarioParseError: If the schema file is not valid JSON
    """
    try:
        with open(schema_path, "r", encoding="utf-8") as f:
            schema: Dict[str, Any] = json.load(f)
        return schema
    except FileNotFoundError as e:
        raise ScenarioIOError(f"Schema file not found: {schema_path}") from e
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"Invalid JSON in schema file: {e}") from e


def validate_scenario_against_schema(scenario: Dict[str, Any], schema: Dict[str, Any]) -> None:
    """
    Validate scenario data against JSON schema.

    Args:
        scenario: Scenario dictionary
        schema: JSON schema dictionary

    Raises:
        ScenarioValidationError: If validation fails
    """
    try:
        validator = Draft7Validator(schema)

        # Collect all validation errors
        errors = []
        for error in validator.iter_errors(scenario):
            path = ".".join(str(p) for p in error.path) if error.path else "root"
            errors.append(f"{path}: {error.message}")

        if errors:
            raise ScenarioValidationError(
                "Scenario does not match schema", errors=errors, reason="schema"
            )

    except SchemaError as e:
        raise ScenarioValidationError(f"Invalid schema: {e}") from e


def _check(label: str, problems: List[Tuple[str, str]], fn, *args) -> Any:
    """Run one semantic check, recording (reason, message) instead of raising."""
    try:
        return fn(*args)
    except DissipathError as e:
        problems.append((getattr(e, "reason", "invalid"), f"{label}: {e.message}"))
        return None


def _check_chart_point(system, p, label: str, problems: List[Tuple[str, str]]) -> None:
    frame = _check(label, problems, tangent_frame, system.chart, system.Hfun, p)
    if frame is None:
        return
    # Positive definiteness of the metric at F(p).
    if _check(label, problems, metric_at, system.Hfun, frame.x) is None:
        return
    grad = system.Hfun.grad(frame.x)
    if np.linalg.norm(grad) < tol_grad(system.Hfun, frame.x):
        return
    report = transversality_in_frame(frame, grad)
    if not report.transversal:
        problems.append(
            (
                "non-transversal",
                f"{label}: dH annuls the tangent space at x={frame.x.tolist()} "
                f"(|J^T grad| = {report.diagnostic:.3e})",
            )
        )


def validate_scenario_semantics(scenario: Dict[str, Any]) -> None:
    """
    Semantic validation that goes beyond the schema.

    Builds every object of the scenario and checks it at the start point and at the
    counterexample point.

    Raises:
        ScenarioValidationError: With one "reason: message" entry per problem; the
            error's reason is the first problem's reason
    """
    problems: List[Tuple[str, str]] = []
    Hfun = _check("lyapunov", problems, build_lyapunov, scenario["lyapunov"])
    if Hfun is not None:
        geometry = scenario["geometry"]
        if "tree" in geometry:
            _validate_tree(scenario, Hfun, problems)
        else:
            system = _check("geometry", problems, build_system, scenario, Hfun)
            if system is not None:
                p0 = scenario.get("integration", {}).get("p0")
                if p0 is not None:
                    _check_chart_point(system, p0, "integration.p0", problems)
                p = scenario.get("counterexample", {}).get("p")
                if p is not None:
                    _check_chart_point(system, p, "counterexample.p", problems)

    if problems:
        raise ScenarioValidationError(
            "Scenario failed semantic validation",
            errors=[f"{reason}: {message}" for reason, message in problems],
            reason=problems[0][0],
        )


def _validate_tree(scenario: Dict[str, Any], Hfun, problems: List[Tuple[str, str]]) -> None:
    tree_spec = scenario["geometry"]["tree"]
    tree = _check("geometry.tree", problems, build_monotone_tree, tree_spec, Hfun)
    if tree is None:
        return
    field_spec = scenario.get("field", {"kind": "gradient_flow"})
    _check("field", problems, build_field, field_spec, Hfun)
    _check("integration.start", problems, initial_tree_state, scenario, tree, Hfun)
    report = validate_monotone(tree, Hfun)
    if not report.unique_root:
        problems.append(
            ("not-a-tree", "geometry.tree: H does not have a unique minimum over nodes")
        )
    if report.offending_arcs:
        problems.append(
            (
                "monotonicity-floor",
                f"geometry.tree: dH/ds below the floor on arcs {report.offending_arcs} "
                f"(min {report.min_slope:.3e})",
            )
        )


def validate_scenario_data(
    scenario: Dict[str, Any],
    schema_path: Path = DEFAULT_SCHEMA_PATH,
    strict: bool = True,
) -> None:
    """
    Comprehensive validation of scenario data.

    Args:
        scenario: Scenario dictionary
        schema_path: Path to JSON schema file
        strict: If True, performs the semantic validations as well

    Raises:
        ScenarioValidationError: If validation fails
    """
    schema = load_schema(schema_path)
    validate_scenario_against_schema(scenario, schema)

    if strict:
        validate_scenario_semantics(scenario)


def load_scenario(scenario_path: Path) -> Dict[str, Any]:
    """
    Read a scenario JSON file.

    Raises:
        ScenarioIOError: If the file cannot be read
        ScenarioParseError: If the file is not valid JSON
    """
    try:
        with open(scenario_path, "r", encoding="utf-8") as f:
            scenario: Dict[str, Any] = json.load(f)
    except FileNotFoundError as e:
        raise ScenarioIOError(f"Scenario file not found: {scenario_path}") from e
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"Invalid JSON in scenario file {scenario_path}: {e}") from e
    except OSError as e:
        raise ScenarioIOError(f"Cannot read scenario file {scenario_path}: {e}") from e
    return scenario


def validate_scenario_file(
    scenario_path: Path,
    schema_path: Path = DEFAULT_SCHEMA_PATH,
    strict: bool = True,
) -> Dict[str, Any]:
    """
    Load and validate a scenario JSON file.

    Args:
        scenario_path: Path to scenario JSON file
        schema_path: Path to schema JSON file
        strict: If True, performs additional semantic validations

    Returns:
        Validated scenario dictionary

    Raises:
        ScenarioIOError, ScenarioParseError, ScenarioValidationError
    """
    scenario = load_scenario(scenario_path)
    validate_scenario_data(scenario, schema_path, strict=strict)
    logger.debug("Scenario %s is valid", scenario_path)
    return scenario


def get_validation_summary(scenario: Dict[str, Any]) -> Dict[str, Any]:
    """
    Get a summary of a scenario for reporting.

    Args:
        scenario: Scenario dictionary

    Returns:
        Dictionary with validation summary
    """
    geometry = scenario.get("geometry", {})
    if "tree" in geometry:
        tree = geometry["tree"]
        geometry_summary = f"tree ({len(tree['nodes'])} nodes, {len(tree.get('arcs', []))} arcs)"
    else:
        geometry_summary = f"chart {geometry.get('chart', {}).get('kind', 'unknown')}"
    integration = scenario.get("integration", {})
    return {
        "name": scenario.get("name", "unknown"),
        "lyapunov": scenario.get("lyapunov", {}).get("kind", "unknown"),
        "geometry": geometry_summary,
        "field": scenario.get("field", {}).get("kind", "gradient_flow"),
        "projector_policy": scenario.get("projector_policy", "thermodynamic"),
        "steps": integration.get("steps", 0),
        "counterexample": "counterexample" in scenario,
    }

"""
Scenario services for dissipath.

This module contains the catalog registries, the construction of Lyapunov
functions, charts, fields and trees from scenario dictionaries, and the run
and counterexample services used by the CLI. Nothing here parses command
lines or sets up logging.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from constants import DEFAULT_RANK_ONE_A, DEFAULT_SEED, DEFAULT_TILTS, DEFAULT_TRIALS
from counterexamples import rank_one_demo, scan_near_equilibrium, uniqueness_sweep
from dynamics import (
    AuditReport,
    ProjectorPolicy,
    ReducedSystem,
    VectorField,
    audit,
    detailed_balance_rates,
    integrate,
    make_gradient_flow,
    make_linear_field,
    make_markov_field,
    projector_matrix,
    write_trajectory_csv,
)
from lyapunov import (
    LyapunovFunction,
    alpha_spec,
    burg_spec,
    kl_spec,
    make_f_divergence,
    make_quadratic,
    shifted_kl_spec,
)
from manifold import (
    Chart,
    ParamBox,
    affine_chart,
    circle_chart,
    convex_combination_chart,
    line_chart,
    paraboloid_chart,
    polynomial_chart,
)
from tree import (
    MonotoneTree,
    TreeState,
    bezier,
    build_tree,
    integrate_tree,
    node_state,
    root_state,
    segment,
    tree_audit,
    tree_state,
    write_tree_trajectory_csv,
)
from validators import (
    DissipathError,
    NoWitness,
    ScenarioIOError,
    ScenarioValidationError,
    StepFailure,
)

logger = logging.getLogger(__name__)

# Catalog identifiers with their parameter names
LYAPUNOV_CATALOG: Dict[str, List[str]] = {
    "quadratic": ["G", "center"],
    "kl": ["x_eq"],
    "kl_shifted": ["x_eq"],
    "burg": ["x_eq"],
    "custom_f": ["x_eq", "alpha"],
}
CHART_CATALOG: Dict[str, List[str]] = {
    "line": ["origin", "direction"],
    "affine": ["origin", "basis"],
    "polynomial": ["coefficients"],
    "paraboloid": ["m", "curvature", "offset"],
    "convex_combination": ["start", "end"],
    "circle": ["center", "radius"],
}
FIELD_CATALOG: Dict[str, List[str]] = {
    "linear": ["K", "x_ref"],
    "gradient_flow": [],
    "markov": ["K | conductances", "x_eq"],
}
TREE_CURVE_CATALOG: Dict[str, List[str]] = {
    "segment": [],
    "bezier": ["control"],
}

DEFAULT_TRAJECTORY_FILE = "trajectory.csv"
DEFAULT_AUDIT_FILE = "audit.json"
DEFAULT_REPORT_FILE = "counterexample.json"
DEFAULT_NEAR_EQUILIBRIUM_EPSILONS = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class RunResult:
    name: str
    audit: AuditReport
    trajectory_path: Path
    audit_path: Path


def catalog() -> Dict[str, Any]:
    """All catalog identifiers, for `dissipath catalog`."""
    return {
        "lyapunov": LYAPUNOV_CATALOG,
        "chart": CHART_CATALOG,
        "field": FIELD_CATALOG,
        "tree_curve": TREE_CURVE_CATALOG,
        "projector_policy": [policy.value for policy in ProjectorPolicy],
    }


def _require(params: Dict[str, Any], name: str, context: str) -> Any:
    if name not in params:
        raise ScenarioValidationError(
            f"{context}: missing parameter {name!r}",
            errors=[f"{context}.params.{name}: required parameter is missing"],
        )
    return params[name]


def scenario_seed(scenario: Dict[str, Any]) -> int:
    return int(scenario.get("seed", DEFAULT_SEED))


def build_lyapunov(spec: Dict[str, Any]) -> LyapunovFunction:
    """
    Build a Lyapunov function from {"kind": id, "params": {...}}.

    Raises:
        ScenarioValidationError: On unknown kinds or missing parameters
    """
    kind = spec.get("kind")
    params = spec.get("params", {})
    context = f"lyapunov[{kind}]"
    if kind == "quadratic":
        return make_quadratic(_require(params, "G", context), _require(params, "center", context))
    if kind == "kl":
        return make_f_divergence(kl_spec(_require(params, "x_eq", context)))
    if kind == "kl_shifted":
        return make_f_divergence(shifted_kl_spec(_require(params, "x_eq", context)))
    if kind == "burg":
        return make_f_divergence(burg_spec(_require(params, "x_eq", context)))
    if kind == "custom_f":
        spec_f = alpha_spec(_require(params, "x_eq", context), _require(params, "alpha", context))
        return make_f_divergence(spec_f)
    raise ScenarioValidationError(f"unknown lyapunov kind {kind!r}")


def _param_box(spec: Optional[Dict[str, Any]], m: int) -> Optional[ParamBox]:
    if spec is None:
        return None
    lower = np.array([-np.inf if v is None else v for v in spec["lower"]], dtype=float)
    upper = np.array([np.inf if v is None else v for v in spec["upper"]], dtype=float)
    if lower.shape != (m,) or upper.shape != (m,):
        raise ScenarioValidationError(
            "chart domain has the wrong length",
            errors=[f"geometry.chart.domain: bounds must have length {m}"],
        )
    return ParamBox(lower, upper)


def build_chart(spec: Dict[str, Any]) -> Chart:
    """
    Build a chart from {"kind": id, "params": {...}, "domain": {...}}.

    Raises:
        ScenarioValidationError: On unknown kinds or missing parameters
    """
    kind = spec.get("kind")
    params = spec.get("params", {})
    domain = spec.get("domain")
    context = f"chart[{kind}]"
    if kind == "line":
        return line_chart(
            _require(params, "origin", context),
            _require(params, "direction", context),
            _param_box(domain, 1),
        )
    if kind == "affine":
        basis = np.asarray(_require(params, "basis", context), dtype=float)
        m = basis.shape[1] if basis.ndim == 2 else 0
        return affine_chart(
            _require(params, "origin", context), basis, _param_box(domain, m)
        )
    if kind == "polynomial":
        return polynomial_chart(_require(params, "coefficients", context), _param_box(domain, 1))
    if kind == "paraboloid":
        m = int(_require(params, "m", context))
        return paraboloid_chart(
            m,
            float(params.get("curvature", 1.0)),
            params.get("offset"),
            _param_box(domain, m),
        )
    if kind == "convex_combination":
        return convex_combination_chart(
            _require(params, "start", context),
            _require(params, "end", context),
            _param_box(domain, 1),
        )
    if kind == "circle":
        return circle_chart(params.get("center", (0.0, 0.0)), float(params.get("radius", 1.0)))
    raise ScenarioValidationError(f"unknown chart kind {kind!r}")


def build_field(spec: Dict[str, Any], Hfun: LyapunovFunction) -> VectorField:
    """
    Build a vector field from {"kind": id, "params": {...}}.

    Markov fields take either a rate matrix K or symmetric conductances; x_eq defaults to
    the equilibrium of H.
    """
    kind = spec.get("kind")
    params = spec.get("params", {})
    context = f"field[{kind}]"
    if kind == "linear":
        return make_linear_field(_require(params, "K", context), params.get("x_ref"))
    if kind == "gradient_flow":
        return make_gradient_flow(Hfun)
    if kind == "markov":
        x_eq = params.get("x_eq", Hfun.equilibrium)
        if "K" in params:
            return make_markov_field(params["K"], x_eq)
        conductances = _require(params, "conductances", context)
        return make_markov_field(detailed_balance_rates(x_eq, conductances), x_eq)
    raise ScenarioValidationError(f"unknown field kind {kind!r}")


def build_monotone_tree(spec: Dict[str, Any], Hfun: LyapunovFunction) -> MonotoneTree:
    """Build a tree from {"nodes": [...], "arcs": [...]} with straight or Bezier arcs."""
    positions = {node["id"]: node["position"] for node in spec["nodes"]}
    nodes = [(node["id"], node["position"]) for node in spec["nodes"]]
    arcs = []
    for arc in spec.get("arcs", []):
        start = positions.get(arc["from"])
        end = positions.get(arc["to"])
        if start is None or end is None:
            raise ScenarioValidationError(
                f"arc {arc['id']!r} references an unknown node",
                errors=[f"geometry.tree.arcs.{arc['id']}: unknown endpoint"],
            )
        if arc.get("curve", "segment") == "bezier":
            curve = bezier(start, _require(arc, "control", f"arc[{arc['id']}]"), end)
        else:
            curve = segment(start, end)
        arcs.append((arc["id"], arc["from"], arc["to"], curve))
    return build_tree(nodes, arcs, Hfun)


def build_system(
    scenario: Dict[str, Any], Hfun: Optional[LyapunovFunction] = None
) -> ReducedSystem:
    """Reduced system of a chart scenario; the field defaults to the gradient flow."""
    Hfun = Hfun if Hfun is not None else build_lyapunov(scenario["lyapunov"])
    chart = build_chart(scenario["geometry"]["chart"])
    field_spec = scenario.get("field", {"kind": "gradient_flow"})
    custom = scenario.get("custom_matrix")
    return ReducedSystem(
        Hfun=Hfun,
        chart=chart,
        field=build_field(field_spec, Hfun),
        projector_policy=ProjectorPolicy(scenario.get("projector_policy", "thermodynamic")),
        custom_matrix=None if custom is None else np.asarray(custom, dtype=float),
    )


def initial_tree_state(
    scenario: Dict[str, Any], tree: MonotoneTree, Hfun: LyapunovFunction
) -> TreeState:
    """Start state from integration.start: {"arc", "s"} or {"node"}; the root by default."""
    start = scenario.get("integration", {}).get("start", {})
    if "arc" in start:
        return tree_state(tree, Hfun, start["arc"], float(start.get("s", 1.0)))
    if "node" in start:
        if start["node"] not in tree.positions:
            raise ScenarioValidationError(f"unknown start node {start['node']!r}")
        return node_state(tree, Hfun, start["node"])
    return root_state(tree, Hfun)


def write_json(data: Dict[str, Any], path: Path) -> None:
    """Write a report with full float precision."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise ScenarioIOError(f"Cannot write {path}: {e}") from e


def _output_paths(scenario: Dict[str, Any], out_dir: Path) -> Dict[str, Path]:
    output = scenario.get("output", {})
    return {
        "trajectory": out_dir / output.get("trajectory", DEFAULT_TRAJECTORY_FILE),
        "audit": out_dir / output.get("audit", DEFAULT_AUDIT_FILE),
        "report": out_dir / output.get("report", DEFAULT_REPORT_FILE),
    }


def run_scenario(scenario: Dict[str, Any], out_dir: Path) -> RunResult:
    """
    Integrate a validated scenario and write the trajectory CSV and the audit JSON.

    A StepFailure is not an error of the run: the partial trajectory is written and the
    audit status records the failure.

    Raises:
        ScenarioIOError: If the outputs cannot be written
    """
    name = scenario.get("name", "scenario")
    paths = _output_paths(scenario, out_dir)
    integration = scenario.get("integration")
    if integration is None:
        raise ScenarioValidationError(
            f"scenario {name!r} has no integration block", errors=["integration: required for run"]
        )
    dt = integration["dt"]
    steps = integration["steps"]
    Hfun = build_lyapunov(scenario["lyapunov"])
    logger.info("Running %s (%d steps, dt=%g)", name, steps, dt)

    try:
        paths["trajectory"].parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ScenarioIOError(f"Cannot create {paths['trajectory'].parent}: {e}") from e

    geometry = scenario["geometry"]
    try:
        if "tree" in geometry:
            tree = build_monotone_tree(geometry["tree"], Hfun)
            field = build_field(scenario.get("field", {"kind": "gradient_flow"}), Hfun)
            state0 = initial_tree_state(scenario, tree, Hfun)
            try:
                tree_trajectory = integrate_tree(tree, Hfun, field, state0, dt, steps)
            except StepFailure as e:
                tree_trajectory = e.trajectory
            write_tree_trajectory_csv(tree_trajectory, paths["trajectory"])
            report = tree_audit(tree_trajectory)
        else:
            system = build_system(scenario, Hfun)
            p0 = integration.get("p0")
            if p0 is None:
                raise ScenarioValidationError(
                    f"scenario {name!r} has no p0", errors=["integration.p0: required for charts"]
                )
            try:
                trajectory = integrate(system, p0, dt, steps)
            except StepFailure as e:
                trajectory = e.trajectory
            write_trajectory_csv(trajectory, paths["trajectory"])
            report = audit(trajectory)
    except OSError as e:
        raise ScenarioIOError(f"Cannot write {paths['trajectory']}: {e}") from e

    write_json(report.to_dict(), paths["audit"])
    log = logger.info if report.status in ("ok", "clamped_at_root") else logger.warning
    log(
        "%s: status %s, %d steps, gap %.3e, %d sign violations, %d monotonicity violations",
        name,
        report.status,
        report.steps_completed,
        report.max_dissipation_gap,
        report.sign_violations,
        report.monotonicity_violations,
    )
    return RunResult(
        name=name, audit=report, trajectory_path=paths["trajectory"], audit_path=paths["audit"]
    )


def _affine_projector_field(system: ReducedSystem):
    """x -> projector at the chart point of x, for affine charts and fixed matrices."""
    if system.projector_policy == ProjectorPolicy.CUSTOM_MATRIX:
        matrix = np.asarray(system.custom_matrix, dtype=float)
        return lambda x: matrix

    chart = system.chart
    if chart.label not in ("line", "affine"):
        raise ScenarioValidationError(
            "near-equilibrium scans need an affine chart or a custom matrix",
            errors=[f"geometry.chart.kind: {chart.label} is not affine"],
        )
    p_ref = np.zeros(chart.m)
    origin = chart.embed(p_ref)
    J = chart.jac(p_ref)

    def field(x: np.ndarray) -> np.ndarray:
        p, *_ = np.linalg.lstsq(J, x - origin, rcond=None)
        return projector_matrix(system, p)

    return field


def _rank_one_section(
    scenario: Dict[str, Any], system: Optional[ReducedSystem], Hfun: LyapunovFunction, p
) -> Dict[str, Any]:
    spec = scenario["counterexample"]["rank_one"]
    if "projector" in spec:
        proj = np.asarray(spec["projector"], dtype=float)
    elif scenario.get("custom_matrix") is not None:
        proj = np.asarray(scenario["custom_matrix"], dtype=float)
    elif system is not None and p is not None:
        proj = projector_matrix(system, np.atleast_1d(np.asarray(p, dtype=float)))
    else:
        raise ScenarioValidationError(
            "rank-one demo needs a projector",
            errors=["counterexample.rank_one.projector: no projector and no chart point"],
        )
    try:
        demo = rank_one_demo(
            Hfun,
            proj,
            a=float(spec.get("a", DEFAULT_RANK_ONE_A)),
            y=spec.get("y"),
            center=spec.get("center"),
        )
    except NoWitness as e:
        logger.info("rank-one demo: no witness (%s)", e.message)
        return {"no_witness": True, "reason": e.message}
    result = demo.to_dict()
    result["no_witness"] = False
    return result


def _near_equilibrium_section(scenario: Dict[str, Any], system: ReducedSystem) -> Dict[str, Any]:
    spec = scenario["counterexample"]["near_equilibrium"]
    a = float(spec.get("a", DEFAULT_RANK_ONE_A))
    epsilons: Sequence[float] = spec.get("epsilons", DEFAULT_NEAR_EQUILIBRIUM_EPSILONS)
    records = scan_near_equilibrium(
        system.Hfun, _affine_projector_field(system), spec["y"], a, epsilons
    )
    rows = [
        {
            "epsilon": r.epsilon,
            "x": r.x.tolist(),
            "full_dissipation": r.full_dissipation,
            "reduced_dissipation": r.reduced_dissipation,
            "violation": r.violation,
        }
        for r in records
    ]
    return {
        "a": a,
        "y": list(spec["y"]),
        "records": rows,
        "violations": sum(r.violation for r in records),
    }


def run_counterexample(
    scenario: Dict[str, Any], out_dir: Path, default_trials: int = DEFAULT_TRIALS
) -> Dict[str, Any]:
    """
    Run the counterexample harness of a validated scenario and write the JSON report.

    The report has one section per requested demonstration: "rank_one",
    "uniqueness" (kernel-tilt sweep at the chart point p) and "near_equilibrium".
    """
    name = scenario.get("name", "scenario")
    settings = scenario.get("counterexample", {})
    seed = scenario_seed(scenario)
    trials = int(settings.get("trials", default_trials))
    Hfun = build_lyapunov(scenario["lyapunov"])
    system = build_system(scenario, Hfun) if "chart" in scenario["geometry"] else None
    p = settings.get("p")
    logger.info("Counterexample harness for %s (seed %d, %d trials)", name, seed, trials)

    report: Dict[str, Any] = {"name": name, "seed": seed, "trials": trials}
    if "rank_one" in settings:
        report["rank_one"] = _rank_one_section(scenario, system, Hfun, p)

    if system is not None and p is not None:
        tilts = settings.get("tilts", [*DEFAULT_TILTS, 0.0])
        try:
            sweep = uniqueness_sweep(Hfun, system.chart, p, tilts, trials=trials, seed=seed)
            report["uniqueness"] = sweep.to_dict()
        except NoWitness as e:
            report["uniqueness"] = {"no_witness": True, "reason": e.message}

    if system is not None and "near_equilibrium" in settings:
        report["near_equilibrium"] = _near_equilibrium_section(scenario, system)

    write_json(report, _output_paths(scenario, out_dir)["report"])
    return report


def describe_error(error: DissipathError) -> Dict[str, Any]:
    """Machine-readable form of an error for validation reports."""
    errors = getattr(error, "errors", None) or [error.message]
    return {"reason": error.reason, "code": error.code, "errors": list(errors)}

"""
Tests for services.py module.
"""

import csv
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from lyapunov import make_quadratic  # noqa: E402
from scenario_validator import load_scenario  # noqa: E402
from services import (  # noqa: E402
    build_chart,
    build_field,
    build_lyapunov,
    catalog,
    describe_error,
    run_counterexample,
    run_scenario,
    write_json,
)
from validators import NonTransversal, ScenarioIOError, ScenarioValidationError  # noqa: E402

SCENARIO_DIR = Path(__file__).parent.parent / "data" / "scenarios"

IDENTITY_2D = make_quadratic(np.eye(2), [0.0, 0.0])


def _scenario(name):
    return load_scenario(SCENARIO_DIR / f"{name}.json")


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_catalog():
    """Test the catalog listing."""
    print("\n" + "=" * 80)
    print("TEST: Catalog")
    print("=" * 80)

    listing = catalog()
    assert set(listing) == {"lyapunov", "chart", "field", "tree_curve", "projector_policy"}
    assert {"quadratic", "kl", "kl_shifted", "burg", "custom_f"} <= set(listing["lyapunov"])
    charts = {"line", "affine", "polynomial", "paraboloid", "convex_combination", "circle"}
    assert charts <= set(listing["chart"])
    assert {"linear", "gradient_flow", "markov"} <= set(listing["field"])
    assert "thermodynamic" in listing["projector_policy"]
    json.dumps(listing)
    print("✓ Every identifier listed")


def test_build_lyapunov():
    """Test building Lyapunov functions from scenario blocks."""
    print("\n" + "=" * 80)
    print("TEST: Build Lyapunov functions")
    print("=" * 80)

    specs = [
        {"kind": "quadratic", "params": {"G": [[1.0, 0.0], [0.0, 1.0]], "center": [0.0, 0.0]}},
        {"kind": "kl", "params": {"x_eq": [0.5, 0.5]}},
        {"kind": "kl_shifted", "params": {"x_eq": [0.5, 0.5]}},
        {"kind": "burg", "params": {"x_eq": [0.5, 0.5]}},
        {"kind": "custom_f", "params": {"x_eq": [0.5, 0.5], "alpha": 0.5}},
    ]
    for spec in specs:
        H = build_lyapunov(spec)
        assert H.dim == 2
        print(f"✓ {spec['kind']} built")

    try:
        build_lyapunov({"kind": "kl", "params": {}})
        raise AssertionError("Should raise error for a missing parameter")
    except ScenarioValidationError as e:
        assert "x_eq" in e.message
        assert e.errors == ["lyapunov[kl].params.x_eq: required parameter is missing"]
        print("✓ Missing x_eq rejected")

    try:
        build_lyapunov({"kind": "renyi", "params": {}})
        raise AssertionError("Should raise error for an unknown kind")
    except ScenarioValidationError:
        print("✓ Unknown kind rejected")


def test_build_chart_and_field():
    """Test building charts and fields from scenario blocks."""
    print("\n" + "=" * 80)
    print("TEST: Build charts and fields")
    print("=" * 80)

    specs = [
        {"kind": "line", "params": {"origin": [0.0, 2.0], "direction": [1.0, 0.0]}},
        {
            "kind": "affine",
            "params": {"origin": [0.0, 0.0, 0.0], "basis": [[1, 0], [0, 1], [0, 0]]},
        },
        {"kind": "polynomial", "params": {"coefficients": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]}},
        {"kind": "paraboloid", "params": {"m": 2, "curvature": 0.5}},
        {"kind": "convex_combination", "params": {"start": [0.6, 0.4], "end": [0.4, 0.6]}},
        {"kind": "circle", "params": {"radius": 2.0}},
    ]
    for spec in specs:
        chart = build_chart(spec)
        assert chart.label == spec["kind"]
        print(f"✓ {spec['kind']} chart built")

    chart = build_chart(
        {
            "kind": "line",
            "params": {"origin": [0.0, 0.0], "direction": [1.0, 0.0]},
            "domain": {"lower": [None], "upper": [0.5]},
        }
    )
    assert chart.domain.contains(np.array([-100.0]))
    assert not chart.domain.contains(np.array([0.6]))
    print("✓ Null bound means unbounded")

    try:
        build_chart(
            {
                "kind": "line",
                "params": {"origin": [0.0, 0.0], "direction": [1.0, 0.0]},
                "domain": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
            }
        )
        raise AssertionError("Should raise error for a domain of the wrong length")
    except ScenarioValidationError:
        print("✓ Domain of the wrong length rejected")

    kl = build_lyapunov({"kind": "kl", "params": {"x_eq": [0.5, 0.5]}})
    conductances = [[0.0, 1.0], [1.0, 0.0]]
    markov = build_field({"kind": "markov", "params": {"conductances": conductances}}, kl)
    assert np.allclose(markov(np.array([0.5, 0.5])), 0.0)
    print("✓ Markov field from conductances, x_eq taken from H")

    try:
        build_field({"kind": "linear", "params": {}}, IDENTITY_2D)
        raise AssertionError("Should raise error for a linear field without K")
    except ScenarioValidationError:
        print("✓ Linear field without K rejected")


def test_run_scenario_outputs():
    """Test the trajectory CSV and audit JSON of shipped scenarios."""
    print("\n" + "=" * 80)
    print("TEST: Run scenarios")
    print("=" * 80)

    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir)

        result = run_scenario(_scenario("line_quadratic_gradient_flow"), out / "line")
        rows = _read_csv(result.trajectory_path)
        assert rows[0] == ["t", "p_1", "x_1", "x_2", "H", "diss_full", "diss_reduced"]
        assert len(rows) == 102
        assert abs(float(rows[-1][1]) - math.exp(-1.0)) < 1e-6
        with open(result.audit_path, encoding="utf-8") as f:
            audit = json.load(f)
        assert audit["status"] == "ok" and audit["steps_completed"] == 100
        assert audit["sign_violations"] == 0
        print("✓ Line scenario: p(1) = exp(-1), clean audit")

        result = run_scenario(_scenario("kl_markov_line"), out / "kl")
        assert result.audit.status == "ok"
        assert result.audit.sign_violations == 0
        assert result.audit.max_dissipation_gap <= 1e-8
        print("✓ KL Markov scenario: thermodynamic reduction preserves dissipation")

        result = run_scenario(_scenario("skewed_metric_euclidean"), out / "euclidean")
        assert result.audit.max_dissipation_gap > 1e-3
        print(f"✓ Euclidean reduction: gap {result.audit.max_dissipation_gap:.3g}")

        result = run_scenario(_scenario("two_arc_tree"), out / "tree")
        assert result.audit.status == "clamped_at_root"
        rows = _read_csv(result.trajectory_path)
        assert rows[0][:3] == ["t", "arc_id", "s"]
        assert rows[-1][1] == ""
        print("✓ Tree scenario clamps at the root")


def test_run_scenario_step_failure():
    """Test that a failed step still writes the partial trajectory."""
    print("\n" + "=" * 80)
    print("TEST: Run scenario with a step failure")
    print("=" * 80)

    scenario = {
        "name": "expanding",
        "lyapunov": {
            "kind": "quadratic",
            "params": {"G": [[1.0, 0.0], [0.0, 1.0]], "center": [0.0, 0.0]},
        },
        "geometry": {
            "chart": {
                "kind": "line",
                "params": {"origin": [0.0, 0.0], "direction": [1.0, 0.0]},
                "domain": {"lower": [-1.0], "upper": [1.0]},
            }
        },
        "field": {"kind": "linear", "params": {"K": [[1.0, 0.0], [0.0, 1.0]]}},
        "integration": {"p0": [0.5], "dt": 0.1, "steps": 20},
        "output": {"trajectory": "partial.csv", "audit": "partial_audit.json"},
    }
    with tempfile.TemporaryDirectory() as tmpdir:
        result = run_scenario(scenario, Path(tmpdir))
        assert result.trajectory_path.name == "partial.csv"
        assert result.audit.status == "step_failure"
        assert 0 < result.audit.steps_completed < 20
        rows = _read_csv(result.trajectory_path)
        assert len(rows) == result.audit.steps_completed + 2
        print(f"✓ Stopped after {result.audit.steps_completed} steps, partial trajectory written")

    del scenario["integration"]
    try:
        run_scenario(scenario, Path("unused"))
        raise AssertionError("Should raise error without an integration block")
    except ScenarioValidationError:
        print("✓ Missing integration block rejected")


def test_run_counterexample():
    """Test the counterexample report of the skew projector scenario."""
    print("\n" + "=" * 80)
    print("TEST: Counterexample reports")
    print("=" * 80)

    with tempfile.TemporaryDirectory() as tmpdir:
        out = Path(tmpdir)
        report = run_counterexample(_scenario("skew_projector_demo"), out)
        rank_one = report["rank_one"]
        assert not rank_one["no_witness"]
        assert np.allclose(rank_one["witness"], [1.0, 0.0])
        assert abs(rank_one["full_dissipation"] + 1.0) < 1e-12
        assert abs(rank_one["reduced_dissipation"] - 1.0) < 1e-12
        print("✓ Rank-one demo: full -1, reduced +1 at (1,0)")

        results = report["uniqueness"]["results"]
        assert [r["tilt"] for r in results] == [0.2, 0.1, 0.05, 0.025, 0.0]
        assert all(r["violation_found"] for r in results[:-1])
        assert not results[-1]["violation_found"]
        print("✓ Tilt sweep: violations for every tilt, none at zero")

        assert report["near_equilibrium"]["violations"] == 3
        print("✓ Near-equilibrium scan: three violations")

        written = (out / "counterexample.json").read_text(encoding="utf-8")
        again = run_counterexample(_scenario("skew_projector_demo"), out / "again")
        assert written == (out / "again" / "counterexample.json").read_text(encoding="utf-8")
        assert json.loads(written) == json.loads(json.dumps(again))
        print("✓ Same scenario and seed, byte-identical report")

        report = run_counterexample(_scenario("orthogonal_no_witness"), out / "orthogonal")
        assert report["rank_one"]["no_witness"]
        print("✓ Orthogonal projector: no rank-one witness")


def test_write_json_and_describe_error():
    """Test the JSON writer and error descriptions."""
    print("\n" + "=" * 80)
    print("TEST: JSON writer and error descriptions")
    print("=" * 80)

    with tempfile.TemporaryDirectory() as tmpdir:
        blocker = Path(tmpdir) / "file.txt"
        blocker.write_text("x", encoding="utf-8")
        try:
            write_json({"a": 1}, blocker / "report.json")
            raise AssertionError("Should raise ScenarioIOError")
        except ScenarioIOError as e:
            assert e.code == 4
            print("✓ Unwritable location rejected")

    description = describe_error(NonTransversal("level set"))
    assert description == {"reason": "non-transversal", "code": 2, "errors": ["level set"]}
    description = describe_error(ScenarioValidationError("bad", errors=["a: b"], reason="schema"))
    assert description["errors"] == ["a: b"] and description["reason"] == "schema"
    print("✓ Errors described by reason, code and messages")


def main():
    """Run all tests."""
    print("=" * 80)
    print("Services Module Test Suite")
    print("=" * 80)

    test_catalog()
    test_build_lyapunov()
    test_build_chart_and_field()
    test_run_scenario_outputs()
    test_run_scenario_step_failure()
    test_run_counterexample()
    test_write_json_and_describe_error()

    print("\n" + "=" * 80)
    print("✓ All services tests passed!")
    print("=" * 80)


if __name__ == "__main__":
    main()

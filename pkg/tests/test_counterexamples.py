"""
Tests for counterexamples.py module.
"""

import json
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from counterexamples import (  # noqa: E402
    RankOneOperator,
    dissipative_samples,
    ensure_dissipative_operator,
    near_equilibrium_field,
    rank_one_demo,
    rank_one_operator,
    scan_near_equilibrium,
    tilt_projector,
    uniqueness_sweep,
    verify_witness,
)
from dynamics import dissipation  # noqa: E402
from lyapunov import (  # noqa: E402
    burg_spec,
    kl_spec,
    make_f_divergence,
    make_quadratic,
    shifted_kl_spec,
)
from manifold import affine_chart, line_chart, polynomial_chart, tangent_frame  # noqa: E402
from projector import projector_with_fallback  # noqa: E402
from validators import DimensionMismatch, DissipathError, NoWitness  # noqa: E402

IDENTITY_2D = make_quadratic(np.eye(2), [0.0, 0.0])

# Projector onto span (1,0) along (1,-1): not orthogonal for the identity metric.
SKEW = np.array([[1.0, 1.0], [0.0, 0.0]])

TILTS = [0.2, 0.1, 0.05, 0.025]

X_EQ = np.array([0.5, 0.3, 0.2])
CURVE_COEFFICIENTS = [[0.5, 0.3, 0.2], [0.2, 0.1, -0.1], [0.05, 0.0, 0.05]]


def test_rank_one_operator():
    """Test the rank-one operator and its input checks."""
    print("\n" + "=" * 80)
    print("TEST: Rank-one operator")
    print("=" * 80)

    operator = rank_one_operator(IDENTITY_2D, [0.0, 0.0], SKEW, [0.0, 1.0], 2.0)
    assert np.allclose(operator.v, [1.0, -2.0])
    assert np.allclose(operator.matrix, -np.outer([1.0, -2.0], [1.0, -2.0]))
    print("✓ v = P y - a y = (1,-2)")

    try:
        rank_one_operator(IDENTITY_2D, [0.0, 0.0], SKEW, [1.0, 0.0], 2.0)
        raise AssertionError("Should raise DimensionMismatch for y in the image")
    except DimensionMismatch:
        print("✓ y not orthogonal to im P rejected")

    try:
        rank_one_operator(IDENTITY_2D, [0.0, 0.0], np.diag([1.0, 0.0]), [0.0, 1.0], 2.0)
        raise AssertionError("Should raise NoWitness when P y = 0")
    except NoWitness:
        print("✓ P y = 0 rejected")

    rng = np.random.default_rng(31)
    assert ensure_dissipative_operator(IDENTITY_2D, operator, rng.standard_normal((1000, 2)))
    print("✓ A is negative semidefinite on 1000 samples")

    expanding = RankOneOperator(matrix=np.eye(2), v=operator.v, y=operator.y, a=2.0)
    try:
        ensure_dissipative_operator(IDENTITY_2D, expanding, [[1.0, 0.0]])
        raise AssertionError("Should raise DissipathError for an expanding operator")
    except DissipathError:
        print("✓ Expanding operator rejected")


def test_rank_one_demo():
    """Test the skew projector counterexample."""
    print("\n" + "=" * 80)
    print("TEST: Rank-one demonstration")
    print("=" * 80)

    demo = rank_one_demo(IDENTITY_2D, SKEW, a=2.0, y=[0.0, 1.0])
    assert np.allclose(demo.witness, [1.0, 0.0])
    assert abs(demo.full_dissipation + 1.0) < 1e-12
    assert abs(demo.reduced_dissipation - 1.0) < 1e-12
    assert demo.violation
    print("✓ At (1,0): full -1, reduced +1")

    demo = rank_one_demo(IDENTITY_2D, SKEW)
    assert demo.violation
    assert abs(demo.reduced_dissipation - 1.0) < 1e-12
    print("✓ Witness direction found automatically")

    demo = rank_one_demo(IDENTITY_2D, SKEW, a=1.0, y=[0.0, 1.0])
    assert not demo.violation
    assert abs(demo.reduced_dissipation) < 1e-12
    print("✓ a=1 gives no violation")

    H = make_quadratic(np.diag([2.0, 1.0]), [0.0, 0.0])
    try:
        rank_one_demo(H, np.diag([1.0, 0.0]))
        raise AssertionError("Should raise NoWitness for a metric-orthogonal projector")
    except NoWitness:
        print("✓ Orthogonal projector has no witness")

    report = demo.to_dict()
    assert json.loads(json.dumps(report))["witness"] == [1.0, 0.0]
    print("✓ Report is JSON serializable")


def test_near_equilibrium_field():
    """Test the near-equilibrium fields B_a."""
    print("\n" + "=" * 80)
    print("TEST: Near-equilibrium fields")
    print("=" * 80)

    skew_field = lambda x: SKEW  # noqa: E731
    field = near_equilibrium_field(IDENTITY_2D, skew_field, [0.0, 1.0], 2.0)
    rng = np.random.default_rng(37)
    for x in rng.standard_normal((1000, 2)):
        assert dissipation(IDENTITY_2D, x, field(x)) <= 0.0
    print("✓ B_a is dissipative at 1000 random points")

    records = scan_near_equilibrium(IDENTITY_2D, skew_field, [0.0, 1.0], 2.0, [1e-1, 1e-2, 1e-3])
    for record in records:
        eps = record.epsilon
        assert record.violation
        assert abs(record.full_dissipation + eps**2) < 1e-14
        assert abs(record.reduced_dissipation - eps**2) < 1e-14
    print("✓ Skew projector: reduced dissipation eps^2 > 0 at every scale")

    chart = line_chart([0.0, 0.0], [1.0, 0.0])

    def thermodynamic_field(x):
        return projector_with_fallback(IDENTITY_2D, chart, x[0]).matrix

    scales = [1e-1, 1e-2, 1e-3]
    records = scan_near_equilibrium(IDENTITY_2D, thermodynamic_field, [1.0, 1.0], 2.0, scales)
    assert not any(record.violation for record in records)
    print("✓ Thermodynamic projector: no violation")


def test_tilt_projector():
    """Test that a tilted projector keeps its image."""
    print("\n" + "=" * 80)
    print("TEST: Tilted projector")
    print("=" * 80)

    H = make_quadratic(np.diag([1.0, 2.0, 3.0, 4.0]), np.zeros(4))
    chart = affine_chart([1.0, 1.0, 0.0, 0.0], [[1, 0], [0, 0], [0, 1], [0, 0]])
    p = [0.5, 0.5]
    frame = tangent_frame(chart, H, p)
    for eps in TILTS:
        tilted = tilt_projector(H, chart, p, eps, np.random.default_rng(41))
        P = tilted.matrix
        assert np.max(np.abs(P @ P - P)) < 1e-9
        assert np.allclose(P @ frame.basis, frame.basis, atol=1e-9)
        assert not np.allclose(P, tilted.base)
    print("✓ Idempotent, fixes T_x(M), differs from the thermodynamic projector")


def test_uniqueness_sweep_on_a_line():
    """Test the tilt sweep on the horizontal line through (0,2)."""
    print("\n" + "=" * 80)
    print("TEST: Uniqueness sweep on a line")
    print("=" * 80)

    chart = line_chart([0.0, 2.0], [1.0, 0.0])
    report = uniqueness_sweep(IDENTITY_2D, chart, [1.0], TILTS + [0.0], trials=10000, seed=0)
    tilted = report.results[:-1]
    for result in tilted:
        assert result.violation_found
        assert result.full_dissipation <= 0.0
        assert result.reduced_dissipation > 1e-12
        assert result.margin > 0.0
        full, reduced = verify_witness(
            IDENTITY_2D,
            report.x,
            tilt_projector(IDENTITY_2D, chart, [1.0], result.magnitude).matrix,
            result.witness,
        )
        assert full <= 0.0 and reduced > 0.0
    margins = [result.margin for result in tilted]
    assert all(a > b for a, b in zip(margins, margins[1:]))
    print(f"✓ Violations at every tilt, margins {['%.3g' % m for m in margins]}")

    untilted = report.results[-1]
    assert not untilted.violation_found
    assert untilted.trials == 10000
    print("✓ No violation among 10000 samples at zero tilt")

    again = uniqueness_sweep(IDENTITY_2D, chart, [1.0], TILTS + [0.0], trials=10000, seed=0)
    assert json.dumps(report.to_dict()) == json.dumps(again.to_dict())
    print("✓ Same seed, same report")


def test_uniqueness_sweep_on_catalog_scenarios():
    """Test the tilt sweep across Lyapunov functions and charts."""
    print("\n" + "=" * 80)
    print("TEST: Uniqueness sweep on assorted scenarios")
    print("=" * 80)

    scenarios = [
        ("quadratic line", IDENTITY_2D, line_chart([0.0, 2.0], [1.0, 0.0]), [1.0]),
        ("KL line", make_f_divergence(kl_spec(X_EQ)), line_chart(X_EQ, [1.0, -1.0, 0.0]), [0.1]),
        (
            "Burg line",
            make_f_divergence(burg_spec(X_EQ)),
            line_chart(X_EQ, [1.0, -1.0, 0.0]),
            [0.1],
        ),
        (
            "shifted KL curve",
            make_f_divergence(shifted_kl_spec(X_EQ)),
            polynomial_chart(CURVE_COEFFICIENTS),
            [0.5],
        ),
        (
            "quadratic plane in R^4",
            make_quadratic(np.diag([1.0, 2.0, 3.0, 4.0]), np.zeros(4)),
            affine_chart([1.0, 1.0, 0.0, 0.0], [[1, 0], [0, 0], [0, 1], [0, 0]]),
            [0.5, 0.5],
        ),
    ]
    for label, H, chart, p in scenarios:
        report = uniqueness_sweep(H, chart, p, TILTS + [0.0], trials=2000, seed=0)
        assert all(r.violation_found and r.margin > 0.0 for r in report.results[:-1])
        assert not report.results[-1].violation_found
        print(f"✓ {label}")


def test_dissipative_samples():
    """Test the sampler of dissipative vectors."""
    print("\n" + "=" * 80)
    print("TEST: Dissipative samples")
    print("=" * 80)

    x = np.array([1.0, 2.0])
    samples = dissipative_samples(IDENTITY_2D, x, 500, np.random.default_rng(43))
    assert samples.shape == (500, 2)
    assert np.all(samples @ IDENTITY_2D.grad(x) <= 0.0)
    print("✓ Every sample is dissipative")


def main():
    """Run all tests."""
    print("=" * 80)
    print("Counterexamples Module Test Suite")
    print("=" * 80)

    test_rank_one_operator()
    test_rank_one_demo()
    test_near_equilibrium_field()
    test_tilt_projector()
    test_uniqueness_sweep_on_a_line()
    test_uniqueness_sweep_on_catalog_scenarios()
    test_dissipative_samples()

    print("\n" + "=" * 80)
    print("✓ All counterexamples tests passed!")
    print("=" * 80)


if __name__ == "__main__":
    main()

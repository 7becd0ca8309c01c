"""
Tests for validators.py module.
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from constants import EXIT_IO, EXIT_PARSE, EXIT_VALIDATION  # noqa: E402
from validators import (  # noqa: E402
    DimensionMismatch,
    DissipathError,
    NonTransversal,
    NotPositiveDefinite,
    ScenarioIOError,
    ScenarioParseError,
    ScenarioValidationError,
    StepFailure,
    validate_matrix,
    validate_positive,
    validate_square_matrix,
    validate_step_count,
    validate_symmetric,
    validate_vector,
)


def test_validate_vector():
    """Test vector validation."""
    print("\n" + "=" * 80)
    print("TEST: Validate vector")
    print("=" * 80)

    try:
        vector = validate_vector([1, 2, 3], 3, "x")
        assert vector.dtype == float and vector.shape == (3,)
        print("✓ Valid vector passed")
    except DissipathError:
        raise AssertionError("Should not raise error for a valid vector")

    try:
        validate_vector([1.0, 2.0], 3, "x")
        raise AssertionError("Should raise error for wrong length")
    except DimensionMismatch as e:
        assert "length 3" in e.message
        print("✓ Wrong length rejected")

    try:
        validate_vector([[1.0, 2.0]], name="x")
        raise AssertionError("Should raise error for a matrix")
    except DimensionMismatch as e:
        assert "one-dimensional" in e.message
        print("✓ Matrix rejected")

    try:
        validate_vector([1.0, float("nan")], name="x")
        raise AssertionError("Should raise error for NaN")
    except DissipathError as e:
        assert "non-finite" in e.message
        print("✓ Non-finite entries rejected")


def test_validate_matrix():
    """Test matrix validation."""
    print("\n" + "=" * 80)
    print("TEST: Validate matrix")
    print("=" * 80)

    assert validate_matrix([1.0, 2.0], cols=1).shape == (2, 1)
    print("✓ Column vector promoted to n x 1")

    try:
        validate_matrix([[1.0, 2.0]], rows=2)
        raise AssertionError("Should raise error for wrong row count")
    except DimensionMismatch:
        print("✓ Wrong row count rejected")

    try:
        validate_square_matrix([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        raise AssertionError("Should raise error for a non-square matrix")
    except DimensionMismatch as e:
        assert "square" in e.message
        print("✓ Non-square matrix rejected")

    try:
        validate_square_matrix(np.eye(3), 2)
        raise AssertionError("Should raise error for wrong order")
    except DimensionMismatch:
        print("✓ Wrong order rejected")

    validate_symmetric(np.array([[2.0, 1.0], [1.0, 2.0]]))
    try:
        validate_symmetric(np.array([[2.0, 1.0], [1.1, 2.0]]), "G")
        raise AssertionError("Should raise error for an asymmetric matrix")
    except NotPositiveDefinite as e:
        assert "G is not symmetric" in e.message
        print("✓ Asymmetric matrix rejected")


def test_validate_integration_settings():
    """Test dt and step-count validation."""
    print("\n" + "=" * 80)
    print("TEST: Validate integration settings")
    print("=" * 80)

    assert validate_positive("0.01", "dt") == 0.01
    print("✓ Numeric string accepted")

    for value in (0, -1.0, float("inf"), "abc", None):
        try:
            validate_positive(value, "dt")
            raise AssertionError(f"Should raise error for dt={value!r}")
        except DissipathError:
            print(f"✓ dt={value!r} rejected")

    assert validate_step_count(0) == 0
    assert validate_step_count(np.int64(5)) == 5
    print("✓ Non-negative integers accepted")

    for value in (-1, 2.5, True, "10"):
        try:
            validate_step_count(value)
            raise AssertionError(f"Should raise error for steps={value!r}")
        except DissipathError:
            print(f"✓ steps={value!r} rejected")


def test_error_hierarchy():
    """Test reasons and exit codes of the error classes."""
    print("\n" + "=" * 80)
    print("TEST: Error hierarchy")
    print("=" * 80)

    error = NonTransversal("tangent")
    assert isinstance(error, DissipathError)
    assert error.reason == "non-transversal"
    assert error.code == EXIT_VALIDATION
    print("✓ Numerical errors are validation failures with a reason")

    assert ScenarioParseError("bad json").code == EXIT_PARSE
    assert ScenarioIOError("missing").code == EXIT_IO
    print("✓ Parse and I/O errors carry their exit codes")

    error = ScenarioValidationError("bad", errors=["a: b"], reason="schema")
    assert error.errors == ["a: b"] and error.reason == "schema"
    assert ScenarioValidationError("bad").reason == "invalid"
    print("✓ Validation errors keep their details")

    cause = NonTransversal("level set")
    error = StepFailure(7, cause, trajectory="partial")
    assert error.step == 7 and error.cause is cause and error.trajectory == "partial"
    assert "step 7" in error.message and "NonTransversal" in error.message
    assert error.reason == "step-failure"
    print("✓ Step failures keep the step, the cause and the partial trajectory")


def main():
    """Run all tests."""
    print("=" * 80)
    print("Validators Module Test Suite")
    print("=" * 80)

    test_validate_vector()
    test_validate_matrix()
    test_validate_integration_settings()
    test_error_hierarchy()

    print("\n" + "=" * 80)
    print("✓ All validator tests passed!")
    print("=" * 80)


if __name__ == "__main__":
    main()

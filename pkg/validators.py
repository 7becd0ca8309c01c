"""
Errors and argument validation for dissipath.

This module contains the exception hierarchy shared by all numerical modules
and the small validators they call at their boundaries.
"""

from typing import Any, List, Optional

import numpy as np

from constants import EXIT_IO, EXIT_PARSE, EXIT_VALIDATION, SYMMETRY_RTOL


class DissipathError(Exception):
    """Base exception for all dissipath errors."""

    reason = "invalid"

    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        self.message = message
        self.code = code
        super().__init__(self.message)


class DimensionMismatch(DissipathError):
    """Array shapes do not agree with the declared dimensions."""

    reason = "dimension-mismatch"


class NotPositiveDefinite(DissipathError):
    """A matrix or second derivative that must be positive is not."""

    reason = "not-positive-definite"


class DomainViolation(DissipathError):
    """A state or parameter lies outside the domain of a function or chart."""

    reason = "domain-violation"


class SingularHessian(DissipathError):
    """The Hessian could not be factorized; the Lyapunov function is broken."""

    reason = "singular-hessian"


class AtCriticalPoint(DissipathError):
    """The gradient of H vanishes (within tol_grad) at the queried point."""

    reason = "critical-point"


class RankDeficient(DissipathError):
    """A Jacobian or basis does not have full column rank."""

    reason = "rank-deficient"


class NonTransversal(DissipathError):
    """The differential of H annuls the tangent space of the chart."""

    reason = "non-transversal"


class BadRateMatrix(DissipathError):
    """A Markov rate matrix violates sign, column-sum or equilibrium constraints."""

    reason = "bad-rate-matrix"


class NotATree(DissipathError):
    """A tree description contains a cycle, is disconnected or is inconsistent."""

    reason = "not-a-tree"


class MonotonicityFloorViolated(DissipathError):
    """The derivative of H along a tree arc fell below delta_mono."""

    reason = "monotonicity-floor"


class NoWitness(DissipathError):
    """No counterexample exists for the given projector."""

    reason = "no-witness"


class StepFailure(DissipathError):
    """Integration stopped early; the partial trajectory is kept on the error."""

    reason = "step-failure"

    def __init__(self, step: int, cause: Exception, trajectory: Any = None):
        self.step = step
        self.cause = cause
        self.trajectory = trajectory
        super().__init__(f"step {step} failed: {type(cause).__name__}: {cause}")


class ScenarioValidationError(DissipathError):
    """Scenario data failed schema or semantic validation."""

    def __init__(
        self, message: str, errors: Optional[List[str]] = None, reason: Optional[str] = None
    ):
        self.errors = errors or []
        if reason is not None:
            self.reason = reason
        super().__init__(message, code=EXIT_VALIDATION)

    def __str__(self) -> str:
        if self.errors:
            error_list = "\n  - ".join(self.errors)
            return f"{self.message}\n  - {error_list}"
        return self.message


class ScenarioParseError(DissipathError):
    """Scenario file is not valid JSON."""

    reason = "parse-error"

    def __init__(self, message: str):
        super().__init__(message, code=EXIT_PARSE)


class ScenarioIOError(DissipathError):
    """Scenario file or output location could not be read or written."""

    reason = "io-error"

    def __init__(self, message: str):
        super().__init__(message, code=EXIT_IO)


def validate_vector(value: Any, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """
    Validate and convert a vector argument.

    Args:
        value: Array-like input
        dim: Required length, or None for any length
        name: Name used in error messages

    Returns:
        1-D float array

    Raises:
        DimensionMismatch: If the input is not 1-D or has the wrong length
    """
    array = np.asarray(value, dtype=float)
    if array.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {array.shape}")
    if dim is not None and array.shape[0] != dim:
        raise DimensionMismatch(f"{name} must have length {dim}, got {array.shape[0]}")
    if not np.all(np.isfinite(array)):
        raise DissipathError(f"{name} contains non-finite entries")
    return array


def validate_matrix(
    value: Any,
    rows: Optional[int] = None,
    cols: Optional[int] = None,
    name: str = "matrix",
) -> np.ndarray:
    """
    Validate and convert a matrix argument.

    Args:
        value: Array-like input
        rows: Required number of rows, or None
        cols: Required number of columns, or None
        name: Name used in error messages

    Returns:
        2-D float array

    Raises:
        DimensionMismatch: If the shape does not match
    """
    array = np.asarray(value, dtype=float)
    if array.ndim == 1 and cols == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {array.shape}")
    if rows is not None and array.shape[0] != rows:
        raise DimensionMismatch(f"{name} must have {rows} rows, got {array.shape[0]}")
    if cols is not None and array.shape[1] != cols:
        raise DimensionMismatch(f"{name} must have {cols} columns, got {array.shape[1]}")
    if not np.all(np.isfinite(array)):
        raise DissipathError(f"{name} contains non-finite entries")
    return array


def validate_square_matrix(
    value: Any, dim: Optional[int] = None, name: str = "matrix"
) -> np.ndarray:
    """Validate a square matrix, optionally of a given order."""
    array = validate_matrix(value, name=name)
    if array.shape[0] != array.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {array.shape}")
    if dim is not None and array.shape[0] != dim:
        raise DimensionMismatch(f"{name} must be {dim}x{dim}, got shape {array.shape}")
    return array


def validate_symmetric(matrix: np.ndarray, name: str = "matrix") -> None:
    """
    Validate symmetry of a square matrix to SYMMETRY_RTOL relative.

    Raises:
        NotPositiveDefinite: If the matrix is not symmetric
    """
    scale = max(1.0, float(np.max(np.abs(matrix))))
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite(f"{name} is not symmetric (max asymmetry {asymmetry:.3e})")


def validate_positive(value: Any, name: str) -> float:
    """Validate a strictly positive finite scalar."""
    try:
        number = float(value)
    except (TypeError, ValueError) as e:
        raise DissipathError(f"{name} must be a number") from e
    if not np.isfinite(number) or number <= 0:
        raise DissipathError(f"{name} must be positive, got {value}")
    return number


def validate_step_count(value: Any, name: str = "steps") -> int:
    """Validate a non-negative integer step count."""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DissipathError(f"{name} must be an integer")
    if value < 0:
        raise DissipathError(f"{name} must be non-negative, got {value}")
    return int(value)

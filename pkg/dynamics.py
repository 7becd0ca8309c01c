"""
Vector fields, reduced dynamics on charts and the entropy-production audit.

This module contains the vector-field catalog (linear, gradient flow, Markov
kinetics), the projected right-hand side in chart coordinates, a fixed-step
RK4 integrator and the audit comparing full and reduced dissipation.
"""

import csv
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import linalg

from constants import (
    CSV_SIGNIFICANT_DIGITS,
    RATE_MATRIX_TOL,
    RESIDUAL_RTOL,
    RK4_MONOTONE_FACTOR,
    SIGN_TOL,
)
from lyapunov import LyapunovFunction
from manifold import Chart, tangent_frame
from projector import (
    curve_projector,
    euclidean_projector,
    orthogonal_projector,
    projector_with_fallback,
)
from validators import (
    BadRateMatrix,
    DimensionMismatch,
    DissipathError,
    DomainViolation,
    StepFailure,
    validate_positive,
    validate_square_matrix,
    validate_step_count,
    validate_vector,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VectorField:
    """Map x -> W(x). Dissipativity is measured, never assumed."""

    dim: int
    eval_fn: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return validate_vector(self.eval_fn(x), self.dim, f"{self.label} field value")


class ProjectorPolicy(str, Enum):
    THERMODYNAMIC = "thermodynamic"
    CURVE = "curve"
    ORTHOGONAL = "orthogonal"
    EUCLIDEAN = "euclidean"
    CUSTOM_MATRIX = "custom_matrix"


@dataclass(frozen=True)
class ReducedSystem:
    """Lyapunov function, chart, vector field and the projector used to reduce it."""

    Hfun: LyapunovFunction
    chart: Chart
    field: VectorField
    projector_policy: ProjectorPolicy = ProjectorPolicy.THERMODYNAMIC
    custom_matrix: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if not self.Hfun.dim == self.chart.n == self.field.dim:
            raise DimensionMismatch(
                f"H on R^{self.Hfun.dim}, chart into R^{self.chart.n}, field on R^{self.field.dim}"
            )
        if self.projector_policy == ProjectorPolicy.CURVE and self.chart.m != 1:
            raise DimensionMismatch("curve policy needs a one-dimensional chart")
        if self.projector_policy == ProjectorPolicy.CUSTOM_MATRIX:
            if self.custom_matrix is None:
                raise DimensionMismatch("custom_matrix policy needs a matrix")
            validate_square_matrix(self.custom_matrix, self.Hfun.dim, "custom_matrix")


@dataclass(frozen=True)
class ProjectedState:
    p: np.ndarray
    x: np.ndarray
    field_value: np.ndarray
    projected: np.ndarray
    pdot: np.ndarray
    full_dissipation: float
    reduced_dissipation: float


@dataclass
class Trajectory:
    times: np.ndarray
    params: np.ndarray
    states: np.ndarray
    H_values: np.ndarray
    full_dissipation: np.ndarray
    reduced_dissipation: np.ndarray
    dt: float
    status: str = "ok"


@dataclass(frozen=True)
class AuditReport:
    max_dissipation_gap: float
    sign_violations: int
    monotonicity_violations: int
    steps_completed: int
    status: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DissipativityReport:
    samples: int
    max_dissipation: float
    positive_count: int

    @property
    def dissipative(self) -> bool:
        return self.positive_count == 0


# Vector field catalog


def make_linear_field(K, x_ref=None) -> VectorField:
    """W(x) = K (x - x_ref), x_ref = 0 by default."""
    K = validate_square_matrix(K, name="K")
    n = K.shape[0]
    ref = np.zeros(n) if x_ref is None else validate_vector(x_ref, n, "x_ref")
    return VectorField(dim=n, eval_fn=lambda x: K @ (x - ref), label="linear")


def make_gradient_flow(Hfun: LyapunovFunction) -> VectorField:
    """Euclidean steepest descent W(x) = -grad H(x)."""
    return VectorField(dim=Hfun.dim, eval_fn=lambda x: -Hfun.grad(x), label="gradient_flow")


def validate_rate_matrix(K, x_eq) -> None:
    """
    Check a Markov rate matrix: nonnegative off-diagonals, zero column sums, K x_eq = 0.

    Raises:
        BadRateMatrix: On any violation
    """
    off_diagonal = K - np.diag(np.diag(K))
    if np.any(off_diagonal < -RATE_MATRIX_TOL):
        raise BadRateMatrix("rate matrix has a negative off-diagonal entry")
    column_sums = K.sum(axis=0)
    if np.any(np.abs(column_sums) > RATE_MATRIX_TOL * max(1.0, float(np.max(np.abs(K))))):
        raise BadRateMatrix(f"rate matrix column sums are not zero: {column_sums.tolist()}")
    residual = float(np.linalg.norm(K @ x_eq))
    if residual > 1e-10 * (1.0 + float(np.linalg.norm(K)) * float(np.linalg.norm(x_eq))):
        raise BadRateMatrix(f"x_eq is not an equilibrium of K (|K x_eq| = {residual:.3e})")


def make_markov_field(K, x_eq) -> VectorField:
    """
    Markov kinetics W(x) = K x.

    Raises:
        BadRateMatrix: If K is not a rate matrix with equilibrium x_eq
    """
    K = validate_square_matrix(K, name="K")
    x_eq = validate_vector(x_eq, K.shape[0], "x_eq")
    validate_rate_matrix(K, x_eq)
    return VectorField(dim=K.shape[0], eval_fn=lambda x: K @ x, label="markov")


def detailed_balance_rates(x_eq, conductances) -> np.ndarray:
    """
    Rate matrix K_ij = c_ij / x_eq_j (i != j) from symmetric nonnegative conductances c.

    Detailed balance K_ij x_eq_j = K_ji x_eq_i holds, so K x_eq = 0.
    """
    x_eq = validate_vector(x_eq, name="x_eq")
    c = validate_square_matrix(conductances, x_eq.shape[0], "conductances")
    if np.any(c < 0) or not np.allclose(c, c.T):
        raise BadRateMatrix("conductances must be symmetric and nonnegative")
    K = c / x_eq[np.newaxis, :]
    np.fill_diagonal(K, 0.0)
    np.fill_diagonal(K, -K.sum(axis=0))
    return K


def dissipation(Hfun: LyapunovFunction, x, Q) -> float:
    """D_x(H)(Q) = sum_i Q_i dH/dx_i."""
    return Hfun.differential(x, Q)


def measure_dissipativity(
    Hfun: LyapunovFunction, field: VectorField, points
) -> DissipativityReport:
    """Sample D_x(H)(W(x)) on the given points and count positive values."""
    values = np.array([dissipation(Hfun, x, field(np.asarray(x, dtype=float))) for x in points])
    positive = int(np.sum(values > SIGN_TOL))
    if positive:
        logger.warning(
            "%s field is not dissipative at %d of %d samples", field.label, positive, len(values)
        )
    return DissipativityReport(
        samples=len(values),
        max_dissipation=float(np.max(values)) if len(values) else 0.0,
        positive_count=positive,
    )


# Reduced dynamics


def projector_matrix(system: ReducedSystem, p: np.ndarray) -> np.ndarray:
    """Projector onto T_x(M) at F(p) selected by the system's policy."""
    policy = system.projector_policy
    if policy == ProjectorPolicy.THERMODYNAMIC:
        return projector_with_fallback(system.Hfun, system.chart, p).matrix
    if policy == ProjectorPolicy.CURVE:
        return curve_projector(system.Hfun, system.chart, p).matrix
    if policy == ProjectorPolicy.CUSTOM_MATRIX:
        return np.asarray(system.custom_matrix, dtype=float)
    basis = system.chart.jac(p)
    if policy == ProjectorPolicy.ORTHOGONAL:
        return orthogonal_projector(system.Hfun, system.chart.embed(p), basis).matrix
    return euclidean_projector(basis)


def evaluate(system: ReducedSystem, p) -> ProjectedState:
    """
    Project W(F(p)) onto T_x(M) and pull it back to chart coordinates.

    The pullback solves the metric normal equations (J^T G J) pdot = J^T G v, which is
    exact because v lies in the column span of J.
    """
    frame = tangent_frame(system.chart, system.Hfun, p)
    field_value = system.field(frame.x)
    projected = projector_matrix(system, frame.p) @ field_value

    J = frame.basis
    rhs = J.T @ (frame.metric.hess @ projected)
    pdot = linalg.cho_solve(linalg.cho_factor(frame.metric_gram), rhs)
    residual = float(np.linalg.norm(J @ pdot - projected))
    if residual > RESIDUAL_RTOL * (1.0 + float(np.linalg.norm(projected))):
        logger.warning("projected field leaves T_x(M) at p=%s (residual %.3e)", frame.p, residual)

    grad = system.Hfun.grad(frame.x)
    return ProjectedState(
        p=frame.p,
        x=frame.x,
        field_value=field_value,
        projected=projected,
        pdot=pdot,
        full_dissipation=float(grad @ field_value),
        reduced_dissipation=float(grad @ projected),
    )


def reduced_rhs(system: ReducedSystem, p) -> np.ndarray:
    """Chart velocity pdot with J pdot = P_x W(F(p))."""
    return evaluate(system, p).pdot


def _trajectory(
    records: List[ProjectedState],
    times: List[float],
    system: ReducedSystem,
    dt: float,
    status: str,
) -> Trajectory:
    m, n = system.chart.m, system.chart.n
    return Trajectory(
        times=np.array(times),
        params=np.array([r.p for r in records]).reshape(-1, m),
        states=np.array([r.x for r in records]).reshape(-1, n),
        H_values=np.array([system.Hfun.value(r.x) for r in records]),
        full_dissipation=np.array([r.full_dissipation for r in records]),
        reduced_dissipation=np.array([r.reduced_dissipation for r in records]),
        dt=dt,
        status=status,
    )


def integrate(system: ReducedSystem, p0, dt: float, steps: int) -> Trajectory:
    """
    Classical fixed-step RK4 on the reduced system.

    Raises:
        StepFailure: When a projector cannot be built or the parameter leaves the chart
            domain; the partial trajectory is attached to the error
    """
    dt = validate_positive(dt, "dt")
    steps = validate_step_count(steps)
    chart = system.chart
    p = validate_vector(np.atleast_1d(np.asarray(p0, dtype=float)), chart.m, "p0")
    if not chart.domain.contains(p):
        raise DomainViolation(f"p0={p.tolist()} lies outside the chart domain")

    records: List[ProjectedState] = []
    times: List[float] = []
    try:
        current = evaluate(system, p)
    except DissipathError as e:
        raise StepFailure(0, e, _trajectory(records, times, system, dt, "step_failure")) from e
    records.append(current)
    times.append(0.0)

    for step in range(1, steps + 1):
        try:
            k1 = current.pdot
            k2 = reduced_rhs(system, current.p + 0.5 * dt * k1)
            k3 = reduced_rhs(system, current.p + 0.5 * dt * k2)
            k4 = reduced_rhs(system, current.p + dt * k3)
            p_next = current.p + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not chart.domain.contains(p_next):
                raise DomainViolation(f"parameter {p_next.tolist()} left the chart domain")
            current = evaluate(system, p_next)
        except DissipathError as e:
            logger.warning("integration stopped at step %d: %s", step, e.message)
            partial = _trajectory(records, times, system, dt, "step_failure")
            raise StepFailure(step, e, partial) from e
        records.append(current)
        times.append(step * dt)
        logger.debug(
            "step %d: full %.6e reduced %.6e",
            step,
            current.full_dissipation,
            current.reduced_dissipation,
        )

    return _trajectory(records, times, system, dt, "ok")


def audit(trajectory: Trajectory) -> AuditReport:
    """
    Compare full and reduced dissipation along a trajectory.

    Counts sign violations (reduced > 1e-12 while full <= 0) and increases of H
    beyond the RK4 allowance 10 dt^5 on steps where the full field is dissipative.
    """
    full = trajectory.full_dissipation
    reduced = trajectory.reduced_dissipation
    gap = float(np.max(np.abs(full - reduced))) if len(full) else 0.0
    sign_violations = int(np.sum((reduced > SIGN_TOL) & (full <= 0.0)))

    allowance = RK4_MONOTONE_FACTOR * trajectory.dt**5
    increases = np.diff(trajectory.H_values) > allowance
    dissipative = (full[:-1] <= 0.0) & (full[1:] <= 0.0)
    monotonicity_violations = int(np.sum(increases & dissipative))

    return AuditReport(
        max_dissipation_gap=gap,
        sign_violations=sign_violations,
        monotonicity_violations=monotonicity_violations,
        steps_completed=max(len(trajectory.times) - 1, 0),
        status=trajectory.status,
    )


def _fmt(value: float) -> str:
    return format(float(value), f".{CSV_SIGNIFICANT_DIGITS}g")


def trajectory_header(m: int, n: int) -> List[str]:
    return (
        ["t"]
        + [f"p_{i}" for i in range(1, m + 1)]
        + [f"x_{i}" for i in range(1, n + 1)]
        + ["H", "diss_full", "diss_reduced"]
    )


def write_trajectory_csv(trajectory: Trajectory, path: Path) -> None:
    """Write t,p_1..p_m,x_1..x_n,H,diss_full,diss_reduced with 17 significant digits."""
    m = trajectory.params.shape[1]
    n = trajectory.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(trajectory_header(m, n))
        for k, t in enumerate(trajectory.times):
            row = [t, *trajectory.params[k], *trajectory.states[k]]
            row += [
                trajectory.H_values[k],
                trajectory.full_dissipation[k],
                trajectory.reduced_dissipation[k],
            ]
            writer.writerow([_fmt(v) for v in row])

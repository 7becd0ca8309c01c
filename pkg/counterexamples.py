"""
Constructive evidence that the thermodynamic projector is the only one that works.

This module builds the rank-one dissipative operators
A_a x = -v <v|x>, v = P y - a y, that break every non-orthogonal projector on
linear problems, the near-equilibrium fields
B_a(x) = -v_x D_x(H)(v_x), v_x = P_x y - a y, and the kernel-tilt sweep that
finds a dissipative vector with non-dissipative projection for every projector
whose kernel differs from the thermodynamic one.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

from constants import DEFAULT_RANK_ONE_A, DEFAULT_SEED, DEFAULT_TRIALS, SIGN_TOL
from dynamics import VectorField, dissipation
from lyapunov import LyapunovFunction, MetricPoint, metric_at
from manifold import Chart
from projector import metric_gram_schmidt, thermodynamic_projector
from validators import (
    DimensionMismatch,
    DissipathError,
    NoWitness,
    validate_square_matrix,
    validate_vector,
)

logger = logging.getLogger(__name__)

ProjectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RankOneOperator:
    matrix: np.ndarray
    v: np.ndarray
    y: np.ndarray
    a: float


@dataclass(frozen=True)
class RankOneDemo:
    """Witness state for a rank-one operator: full dissipation <= 0 < reduced dissipation."""

    operator: RankOneOperator
    witness: np.ndarray
    full_dissipation: float
    reduced_dissipation: float

    @property
    def violation(self) -> bool:
        return self.full_dissipation <= 0.0 and self.reduced_dissipation > SIGN_TOL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "y": self.operator.y.tolist(),
            "a": self.operator.a,
            "v": self.operator.v.tolist(),
            "witness": self.witness.tolist(),
            "full_dissipation": self.full_dissipation,
            "reduced_dissipation": self.reduced_dissipation,
            "margin": self.reduced_dissipation,
            "violation": self.violation,
        }


@dataclass(frozen=True)
class ProjectorPerturbation:
    """Projector with the same image as `base` and a kernel tilted by magnitude * u."""

    base: np.ndarray
    kernel_tilt: np.ndarray
    magnitude: float
    matrix: np.ndarray


@dataclass(frozen=True)
class TiltResult:
    magnitude: float
    violation_found: bool
    witness: Optional[np.ndarray]
    full_dissipation: float
    reduced_dissipation: float
    margin: float
    trials: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tilt": self.magnitude,
            "violation_found": self.violation_found,
            "witness": None if self.witness is None else self.witness.tolist(),
            "full_dissipation": self.full_dissipation,
            "reduced_dissipation": self.reduced_dissipation,
            "margin": self.margin,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class UniquenessReport:
    x: np.ndarray
    results: List[TiltResult] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"x": self.x.tolist(), "results": [r.to_dict() for r in self.results]}


@dataclass(frozen=True)
class ViolationRecord:
    epsilon: float
    x: np.ndarray
    full_dissipation: float
    reduced_dissipation: float

    @property
    def violation(self) -> bool:
        return self.full_dissipation <= 0.0 and self.reduced_dissipation > SIGN_TOL


def rank_one_operator(Hfun: LyapunovFunction, x_context, proj, y, a: float) -> RankOneOperator:
    """
    Operator A = -v <v|.>_x with v = P y - a y, so that <x|A x> = -<v|x>^2 <= 0.

    Raises:
        DimensionMismatch: If y is not metric-orthogonal to the image of P
        NoWitness: If P y = 0 (no counterexample can be built from this y)
    """
    metric = metric_at(Hfun, x_context)
    P = validate_square_matrix(proj, Hfun.dim, "projector")
    y = validate_vector(y, Hfun.dim, "y")
    G = metric.hess

    leakage = float(np.linalg.norm(P.T @ G @ y))
    if leakage > 1e-9 * max(1.0, float(np.linalg.norm(P)) * metric.norm(y)):
        raise DimensionMismatch("y must be metric-orthogonal to the image of the projector")
    Py = P @ y
    if metric.norm(Py) <= 1e-12 * max(1.0, metric.norm(y)):
        raise NoWitness("P y = 0: the projector kills this metric-orthogonal direction")

    v = Py - a * y
    return RankOneOperator(matrix=-np.outer(v, G @ v), v=v, y=y, a=float(a))


def find_witness_direction(metric: MetricPoint, proj: np.ndarray) -> np.ndarray:
    """
    Direction y metric-orthogonal to im P with the largest |P y|_x.

    Raises:
        NoWitness: If P y = 0 for every metric-orthogonal y (P is metric-orthogonal)
    """
    complement = linalg.null_space(proj.T @ metric.hess)
    if complement.shape[1] == 0:
        raise NoWitness("projector image is the whole space")
    images = proj @ complement
    norms = np.array([metric.norm(images[:, k]) for k in range(complement.shape[1])])
    best = int(np.argmax(norms))
    if norms[best] <= 1e-10:
        raise NoWitness("projector is orthogonal in the Shahshahani metric: no counterexample")
    y = complement[:, best]
    return y / metric.norm(y)


def rank_one_demo(
    Hfun: LyapunovFunction,
    proj,
    a: float = DEFAULT_RANK_ONE_A,
    y=None,
    center=None,
) -> RankOneDemo:
    """
    Linear field W(x) = A (x - c) with c the center of H, evaluated at the witness x = c + P y.

    For quadratic H the field is globally dissipative, while the projected field has
    dissipation (a - 1) |P y|^4 > 0 at the witness when a > 1.
    """
    c = Hfun.equilibrium if center is None else validate_vector(center, Hfun.dim, "center")
    metric = metric_at(Hfun, c)
    P = validate_square_matrix(proj, Hfun.dim, "projector")
    y = find_witness_direction(metric, P) if y is None else validate_vector(y, Hfun.dim, "y")
    operator = rank_one_operator(Hfun, c, P, y, a)

    witness = c + P @ y
    w = operator.matrix @ (witness - c)
    full = dissipation(Hfun, witness, w)
    reduced = dissipation(Hfun, witness, P @ w)
    demo = RankOneDemo(
        operator=operator, witness=witness, full_dissipation=full, reduced_dissipation=reduced
    )
    logger.info("rank-one demo: full %.6g, reduced %.6g at %s", full, reduced, witness.tolist())
    return demo


def near_equilibrium_field(
    Hfun: LyapunovFunction, projector_field: ProjectorField, y, a: float
) -> VectorField:
    """B_a(x) = -v_x D_x(H)(v_x), v_x = P_x y - a y; its dissipation is -(D_x(H)(v_x))^2."""
    y = validate_vector(y, Hfun.dim, "y")

    def evaluate(x: np.ndarray) -> np.ndarray:
        v = projector_field(x) @ y - a * y
        return -v * dissipation(Hfun, x, v)

    return VectorField(dim=Hfun.dim, eval_fn=evaluate, label=f"B_{a:g}")


def scan_near_equilibrium(
    Hfun: LyapunovFunction,
    projector_field: ProjectorField,
    y,
    a: float,
    epsilons: Sequence[float],
) -> List[ViolationRecord]:
    """
    Evaluate B_a at x = x_eq + eps P_{x_eq} y and report full and reduced dissipation.

    The direction P_{x_eq} y stays in a linear chart through x_eq.
    """
    y = validate_vector(y, Hfun.dim, "y")
    field_b = near_equilibrium_field(Hfun, projector_field, y, a)
    direction = projector_field(Hfun.equilibrium) @ y
    records = []
    for eps in epsilons:
        x = Hfun.equilibrium + eps * direction
        w = field_b(x)
        records.append(
            ViolationRecord(
                epsilon=float(eps),
                x=x,
                full_dissipation=dissipation(Hfun, x, w),
                reduced_dissipation=dissipation(Hfun, x, projector_field(x) @ w),
            )
        )
    return records


def tilt_projector(
    Hfun: LyapunovFunction,
    chart: Chart,
    p,
    magnitude: float,
    rng: Optional[np.random.Generator] = None,
) -> ProjectorPerturbation:
    """
    Replace the functional <nu|.>_x in the thermodynamic projector by <nu + eps u|.>_x.

    u is a random metric-unit vector metric-orthogonal to nu and W_0, so the image stays
    T_x(M) and the kernel rotates away from ker D_x(H) for eps > 0.
    """
    rng = rng if rng is not None else np.random.default_rng(DEFAULT_SEED)
    base = thermodynamic_projector(Hfun, chart, p)
    metric = metric_at(Hfun, base.x)
    u = _tilt_direction(metric, base.nu, base.w0_basis, rng)
    return _perturbation(metric, base.matrix, base.w0_basis, base.nu, base.nu_w, u, magnitude)


def _tilt_direction(
    metric: MetricPoint, nu: np.ndarray, w0: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    n = nu.shape[0]
    fixed = [w0[:, k] for k in range(w0.shape[1])] + [nu]
    for _ in range(16):
        candidate = metric_gram_schmidt(metric, rng.standard_normal((n, 1)), against=fixed)
        if candidate.shape[1] == 1:
            return candidate[:, 0]
    raise NoWitness("no tilt direction: the tangent space and nu span the whole space")


def _perturbation(
    metric: MetricPoint,
    base: np.ndarray,
    w0: np.ndarray,
    nu: np.ndarray,
    nu_w: np.ndarray,
    u: np.ndarray,
    magnitude: float,
) -> ProjectorPerturbation:
    G = metric.hess
    B = np.column_stack([w0, nu_w])
    rows = np.vstack([w0.T @ G, ((nu + magnitude * u) @ G)[np.newaxis, :]])
    if abs(metric.inner(nu + magnitude * u, nu_w)) <= SIGN_TOL:
        raise NoWitness(f"tilt {magnitude:g} puts the tangent antigradient into the kernel")
    matrix = B @ np.linalg.solve(rows @ B, rows)
    return ProjectorPerturbation(
        base=base, kernel_tilt=u, magnitude=float(magnitude), matrix=matrix
    )


def verify_witness(Hfun: LyapunovFunction, x, matrix: np.ndarray, q) -> tuple:
    """(full, reduced) dissipation of Q and of its projection at x."""
    return dissipation(Hfun, x, q), dissipation(Hfun, x, matrix @ np.asarray(q, dtype=float))


def _monte_carlo(
    Hfun: LyapunovFunction,
    x: np.ndarray,
    matrix: np.ndarray,
    metric: MetricPoint,
    trials: int,
    rng: np.random.Generator,
):
    """Best violation among random dissipative vectors, or None."""
    grad = Hfun.grad(x)
    samples = rng.standard_normal((trials, x.shape[0]))
    full = samples @ grad
    samples[full > 0] *= -1.0
    full = np.abs(full) * -1.0
    reduced = samples @ (matrix.T @ grad)
    violating = np.flatnonzero(reduced > SIGN_TOL)
    if violating.size == 0:
        return None
    k = violating[np.argmax(reduced[violating])]
    margin = float(reduced[k]) / metric.norm(samples[k])
    return samples[k], float(full[k]), float(reduced[k]), margin


def uniqueness_sweep(
    Hfun: LyapunovFunction,
    chart: Chart,
    p,
    tilt_magnitudes: Sequence[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
) -> UniquenessReport:
    """
    For every tilt eps > 0, construct a dissipative Q whose tilted projection has positive
    dissipation; for eps = 0 search `trials` random dissipative vectors and report none.

    Raises:
        NonTransversal: If the chart is tangent to the level set of H at F(p)
    """
    rng = np.random.default_rng(seed)
    base = thermodynamic_projector(Hfun, chart, p)
    x = base.x
    metric = metric_at(Hfun, x)
    u = _tilt_direction(metric, base.nu, base.w0_basis, rng)

    results: List[TiltResult] = []
    for eps in tilt_magnitudes:
        eps = float(eps)
        if eps == 0.0:
            found = _monte_carlo(Hfun, x, base.matrix, metric, trials, rng)
            results.append(_tilt_result(eps, found, trials))
            continue

        perturbation = _perturbation(metric, base.matrix, base.w0_basis, base.nu, base.nu_w, u, eps)
        # Dissipative witness along the tilted kernel direction.
        orientation = np.sign(metric.inner(base.nu + eps * u, base.nu_w)) or 1.0
        q = 0.5 * eps * base.nu - orientation * u
        full, reduced = verify_witness(Hfun, x, perturbation.matrix, q)
        if full <= 0.0 and reduced > SIGN_TOL:
            found = (q, full, reduced, reduced / metric.norm(q))
            results.append(_tilt_result(eps, found, 1))
        else:
            found = _monte_carlo(Hfun, x, perturbation.matrix, metric, trials, rng)
            results.append(_tilt_result(eps, found, trials))

    for result in results:
        logger.info(
            "tilt %.4g: violation %s, margin %.6g",
            result.magnitude,
            result.violation_found,
            result.margin,
        )
    return UniquenessReport(x=x, results=results)


def _tilt_result(eps: float, found, trials: int) -> TiltResult:
    if found is None:
        return TiltResult(eps, False, None, 0.0, 0.0, 0.0, trials)
    q, full, reduced, margin = found
    return TiltResult(eps, True, np.asarray(q), full, reduced, margin, trials)


def dissipative_samples(
    Hfun: LyapunovFunction, x, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Random vectors Q with D_x(H)(Q) <= 0 (rows)."""
    grad = Hfun.grad(x)
    samples = rng.standard_normal((count, Hfun.dim))
    samples[samples @ grad > 0] *= -1.0
    return samples


def ensure_dissipative_operator(Hfun: LyapunovFunction, operator: RankOneOperator, points) -> bool:
    """<x|A x>_c <= 0 on every sample (metric at the center of H)."""
    metric = metric_at(Hfun, Hfun.equilibrium)
    for z in points:
        if metric.inner(z, operator.matrix @ z) > SIGN_TOL:
            raise DissipathError("rank-one operator is not negative semidefinite")
    return True

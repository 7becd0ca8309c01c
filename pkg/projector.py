"""
Dissipativity-preserving projectors onto tangent spaces of ansatz manifolds.

This module builds the Shahshahani-orthogonal projector, the rank-one curve
projector e_x D_x(H)(Q) / D_x(H)(e_x), and the general thermodynamic
projector

    P_x Q = Q_0 + zeta nu_W / <nu_W|nu>_x,   zeta = <Q|nu>_x,

where Q_0 is the metric projection of Q onto W_0 = T_x(M) ∩ ker D_x(H).
Near critical points of H (or of H restricted to M) the orthogonal projector
is used instead.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy import linalg

from constants import GRAM_SCHMIDT_DROP, RANK_RTOL, TRANSVERSAL_TOL_SCALE
from lyapunov import LyapunovFunction, MetricPoint, metric_at, tol_grad
from manifold import (
    Chart,
    TangentFrame,
    restricted_gradient_in_frame,
    tangent_frame,
    transversality_in_frame,
    unit_tangent_antigradient_in_frame,
)
from validators import (
    AtCriticalPoint,
    DimensionMismatch,
    NonTransversal,
    RankDeficient,
    validate_matrix,
)

logger = logging.getLogger(__name__)


class ProjectorMode(str, Enum):
    GENERAL = "general"
    CURVE = "curve"
    ORTHOGONAL_FALLBACK = "orthogonal_fallback"


@dataclass(frozen=True)
class ThermodynamicProjector:
    """
    Point-local projector P_x onto T_x(M) with its construction data.

    For the orthogonal fallback nu and nu_w are zero, w0_basis spans the whole
    tangent space and scale is 0, so matrix = W0 W0^T Hes still holds.
    """

    x: np.ndarray
    matrix: np.ndarray
    nu: np.ndarray
    nu_w: np.ndarray
    w0_basis: np.ndarray
    scale: float
    mode: ProjectorMode

    def apply(self, q: np.ndarray) -> np.ndarray:
        return self.matrix @ q


@dataclass(frozen=True)
class OrthogonalProjector:
    """Projector onto span(subspace_basis), self-adjoint in <.|.>_x."""

    x: np.ndarray
    matrix: np.ndarray
    subspace_basis: np.ndarray

    def apply(self, q: np.ndarray) -> np.ndarray:
        return self.matrix @ q


@dataclass(frozen=True)
class ProjectorDiagnostics:
    idempotence_error: float
    tangent_identity_error: float
    image_residual: float
    value_preservation_error: float


def _check_full_rank(basis: np.ndarray) -> None:
    singular_values = np.linalg.svd(basis, compute_uv=False)
    if singular_values[0] == 0.0 or singular_values[-1] < RANK_RTOL * singular_values[0]:
        raise RankDeficient("subspace basis does not have full column rank")


def _orthogonal_matrix(metric: MetricPoint, basis: np.ndarray) -> np.ndarray:
    G = metric.hess
    gram = basis.T @ G @ basis
    return basis @ linalg.cho_solve(linalg.cho_factor(0.5 * (gram + gram.T)), basis.T @ G)


def orthogonal_projector(Hfun: LyapunovFunction, x, basis) -> OrthogonalProjector:
    """
    Orthogonal projector P = B (B^T G B)^{-1} B^T G in the Shahshahani metric at x.

    Raises:
        RankDeficient: If the basis is not of full column rank
    """
    metric = metric_at(Hfun, x)
    basis = validate_matrix(basis, rows=Hfun.dim, name="basis")
    _check_full_rank(basis)
    return OrthogonalProjector(
        x=metric.x, matrix=_orthogonal_matrix(metric, basis), subspace_basis=basis
    )


def euclidean_projector(basis) -> np.ndarray:
    """Euclidean orthogonal projector onto span(basis), the naive Galerkin baseline."""
    basis = validate_matrix(basis, name="basis")
    _check_full_rank(basis)
    return basis @ np.linalg.solve(basis.T @ basis, basis.T)


def metric_gram_schmidt(
    metric: MetricPoint, vectors: np.ndarray, against: Optional[List[np.ndarray]] = None
) -> np.ndarray:
    """
    Modified Gram-Schmidt of the columns of vectors in <.|.>_x.

    Vectors in `against` (already metric-orthonormal) are projected out first and
    are not part of the result; columns with residual norm below 1e-10 are dropped.
    """
    accepted: List[np.ndarray] = list(against or [])
    start = len(accepted)
    for column in vectors.T:
        v = column.astype(float).copy()
        reference = max(1.0, metric.norm(v))
        for u in accepted:
            v = v - metric.inner(u, v) * u
        residual = metric.norm(v)
        if residual > GRAM_SCHMIDT_DROP * reference:
            accepted.append(v / residual)
    result = accepted[start:]
    if not result:
        return np.zeros((vectors.shape[0], 0))
    return np.column_stack(result)


def _general_from_frame(Hfun: LyapunovFunction, frame: TangentFrame) -> ThermodynamicProjector:
    metric = frame.metric
    grad = Hfun.grad(frame.x)
    if np.linalg.norm(grad) < tol_grad(Hfun, frame.x):
        raise AtCriticalPoint(f"{Hfun.label} is critical at {frame.x.tolist()}")

    e_x = metric.solve(grad)
    nu = -e_x / math.sqrt(float(grad @ e_x))
    nu_w = unit_tangent_antigradient_in_frame(frame, grad)
    w0 = metric_gram_schmidt(metric, frame.basis, against=[nu_w])

    overlap = metric.inner(nu_w, nu)
    G = metric.hess
    matrix = w0 @ (w0.T @ G) + np.outer(nu_w, G @ nu) / overlap
    return ThermodynamicProjector(
        x=frame.x,
        matrix=matrix,
        nu=nu,
        nu_w=nu_w,
        w0_basis=w0,
        scale=1.0 / overlap,
        mode=ProjectorMode.GENERAL,
    )


def thermodynamic_projector(Hfun: LyapunovFunction, chart: Chart, p) -> ThermodynamicProjector:
    """
    The unique projector onto T_x(M) that maps every dissipative vector to a dissipative one.

    It preserves D_x(H)(Q) exactly and acts on ker D_x(H) as the metric-orthogonal
    projector onto W_0.

    Raises:
        NonTransversal: If D_x(H) annuls T_x(M)
        AtCriticalPoint: If x is a critical point of H
    """
    frame = tangent_frame(chart, Hfun, p)
    return _general_from_frame(Hfun, frame)


def curve_projector(Hfun: LyapunovFunction, chart: Chart, p) -> ThermodynamicProjector:
    """
    Rank-one projector P_x Q = e_x D_x(H)(Q) / D_x(H)(e_x) for a curve, e_x = dF/dp.

    Raises:
        DimensionMismatch: If the chart is not one-dimensional
        NonTransversal: If D_x(H)(e_x) vanishes
    """
    if chart.m != 1:
        raise DimensionMismatch(f"curve projector needs a one-dimensional chart, got m={chart.m}")
    frame = tangent_frame(chart, Hfun, p)
    grad = Hfun.grad(frame.x)
    e_x = frame.basis[:, 0]
    slope = float(grad @ e_x)
    tolerance = TRANSVERSAL_TOL_SCALE * (1.0 + float(np.linalg.norm(grad)))
    if abs(slope) < tolerance:
        raise NonTransversal(f"D_x(H)(e_x) vanishes at x={frame.x.tolist()}")

    metric = frame.metric
    e_grad = metric.solve(grad)
    nu = -e_grad / math.sqrt(float(grad @ e_grad))
    nu_w = -math.copysign(1.0, slope) * e_x / metric.norm(e_x)
    return ThermodynamicProjector(
        x=frame.x,
        matrix=np.outer(e_x, grad) / slope,
        nu=nu,
        nu_w=nu_w,
        w0_basis=np.zeros((chart.n, 0)),
        scale=1.0 / metric.inner(nu_w, nu),
        mode=ProjectorMode.CURVE,
    )


def _fallback_from_frame(frame: TangentFrame) -> ThermodynamicProjector:
    n = frame.x.shape[0]
    w0 = metric_gram_schmidt(frame.metric, frame.basis)
    return ThermodynamicProjector(
        x=frame.x,
        matrix=_orthogonal_matrix(frame.metric, frame.basis),
        nu=np.zeros(n),
        nu_w=np.zeros(n),
        w0_basis=w0,
        scale=0.0,
        mode=ProjectorMode.ORTHOGONAL_FALLBACK,
    )


def near_equilibrium_projector(Hfun: LyapunovFunction, chart: Chart, p) -> ThermodynamicProjector:
    """
    Orthogonal projector onto T_x(M) in <.|.>_x, the limit of the thermodynamic projector
    at critical points of H or of H_M.

    Raises:
        RankDeficient: If the chart is not an immersion at p
    """
    frame = tangent_frame(chart, Hfun, p)
    return _fallback_from_frame(frame)


def projector_with_fallback(Hfun: LyapunovFunction, chart: Chart, p) -> ThermodynamicProjector:
    """
    Thermodynamic projector, replaced by the orthogonal one at critical points.

    The fallback at critical points of H_M away from the equilibrium extends the
    near-equilibrium result to nonlinear charts and is logged as a warning.
    """
    frame = tangent_frame(chart, Hfun, p)
    grad = Hfun.grad(frame.x)
    if np.linalg.norm(grad) < tol_grad(Hfun, frame.x):
        logger.debug("critical point of %s at %s, orthogonal projector", Hfun.label, frame.x)
        return _fallback_from_frame(frame)
    if not transversality_in_frame(frame, grad).transversal:
        logger.warning(
            "critical point of H restricted to %s chart at x=%s, orthogonal projector",
            chart.label,
            frame.x.tolist(),
        )
        return _fallback_from_frame(frame)
    return _general_from_frame(Hfun, frame)


def projector_diagnostics(
    matrix: np.ndarray,
    frame: TangentFrame,
    Hfun: LyapunovFunction,
    samples: int = 20,
    rng: Optional[np.random.Generator] = None,
) -> ProjectorDiagnostics:
    """
    Numerical projector checks at a frame: P^2 = P, P v = v on T_x(M), im P ⊂ T_x(M),
    and |D_x(H)(P Q) - D_x(H)(Q)| on random Q.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n, m = frame.basis.shape
    grad = Hfun.grad(frame.x)

    idempotence = float(np.max(np.abs(matrix @ matrix - matrix)))
    tangent = frame.basis @ rng.standard_normal((m, samples))
    tangent_identity = float(np.max(np.abs(matrix @ tangent - tangent)))
    coefficients, *_ = np.linalg.lstsq(frame.basis, matrix, rcond=None)
    image_residual = float(np.max(np.abs(frame.basis @ coefficients - matrix)))
    queries = rng.standard_normal((n, samples))
    value_error = float(np.max(np.abs(grad @ (matrix @ queries) - grad @ queries)))
    return ProjectorDiagnostics(
        idempotence_error=idempotence,
        tangent_identity_error=tangent_identity,
        image_residual=image_residual,
        value_preservation_error=value_error,
    )

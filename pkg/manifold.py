"""
Ansatz manifolds given by charts F: B_m -> U.

This module contains the chart type and its catalog, tangent frames with the
restricted metric, the gradient of H restricted to the manifold and the
transversality check.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from constants import FD_STEP_SCALE, RANK_RTOL, TRANSVERSAL_TOL_SCALE
from lyapunov import LyapunovFunction, MetricPoint, metric_at
from validators import (
    DimensionMismatch,
    DomainViolation,
    NonTransversal,
    RankDeficient,
    validate_matrix,
    validate_vector,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamBox:
    """Parameter domain B_m as a (possibly unbounded) box."""

    lower: np.ndarray
    upper: np.ndarray

    def contains(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    @classmethod
    def unbounded(cls, m: int) -> "ParamBox":
        return cls(np.full(m, -np.inf), np.full(m, np.inf))


@dataclass(frozen=True)
class Chart:
    """
    Smooth immersion F of an m-dimensional parameter box into R^n.

    When no analytic Jacobian is given, jac() uses central differences with
    step h = 1e-6 (1 + |p_j|).
    """

    m: int
    n: int
    embed_fn: Callable[[np.ndarray], np.ndarray]
    jac_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    param_domain: Optional[ParamBox] = None
    label: str = "custom"

    @property
    def domain(self) -> ParamBox:
        return self.param_domain if self.param_domain is not None else ParamBox.unbounded(self.m)

    def _checked(self, p) -> np.ndarray:
        p = validate_vector(np.atleast_1d(np.asarray(p, dtype=float)), self.m, "p")
        if not self.domain.contains(p):
            raise DomainViolation(f"parameter {p.tolist()} lies outside the chart domain")
        return p

    def embed(self, p) -> np.ndarray:
        return validate_vector(self.embed_fn(self._checked(p)), self.n, "F(p)")

    def jac(self, p) -> np.ndarray:
        p = self._checked(p)
        if self.jac_fn is not None:
            return validate_matrix(self.jac_fn(p), self.n, self.m, "jacobian")
        return finite_difference_jacobian(self.embed_fn, p, self.n)


@dataclass(frozen=True)
class TangentFrame:
    """Tangent space T_x(M) at x = F(p) with the Gram matrix J^T Hes J."""

    p: np.ndarray
    x: np.ndarray
    basis: np.ndarray
    metric_gram: np.ndarray
    metric: MetricPoint


@dataclass(frozen=True)
class TransversalityReport:
    transversal: bool
    diagnostic: float


def finite_difference_jacobian(
    fn: Callable[[np.ndarray], np.ndarray], p: np.ndarray, n: int
) -> np.ndarray:
    """Central-difference Jacobian of fn at p."""
    jac = np.empty((n, p.shape[0]))
    for j in range(p.shape[0]):
        h = FD_STEP_SCALE * (1.0 + abs(p[j]))
        step = np.zeros_like(p)
        step[j] = h
        jac[:, j] = (np.asarray(fn(p + step)) - np.asarray(fn(p - step))) / (2.0 * h)
    return jac


# Chart catalog


def affine_chart(origin, basis, domain: Optional[ParamBox] = None, label: str = "affine") -> Chart:
    """F(p) = origin + B p for an n x m basis B."""
    origin = validate_vector(origin, name="origin")
    B = validate_matrix(basis, rows=origin.shape[0], name="basis")
    return Chart(
        m=B.shape[1],
        n=origin.shape[0],
        embed_fn=lambda p: origin + B @ p,
        jac_fn=lambda p: B,
        param_domain=domain,
        label=label,
    )


def line_chart(origin, direction, domain: Optional[ParamBox] = None) -> Chart:
    """Straight line F(p) = origin + p * direction."""
    direction = validate_vector(direction, name="direction")
    return affine_chart(origin, direction.reshape(-1, 1), domain, label="line")


def polynomial_chart(coefficients, domain: Optional[ParamBox] = None) -> Chart:
    """Polynomial curve F(p) = sum_k c_k p^k, one n-vector c_k per power."""
    C = validate_matrix(coefficients, name="coefficients")
    degree = C.shape[0] - 1

    def embed(p: np.ndarray) -> np.ndarray:
        powers = p[0] ** np.arange(degree + 1)
        return powers @ C

    def jac(p: np.ndarray) -> np.ndarray:
        k = np.arange(1, degree + 1)
        dpowers = k * p[0] ** (k - 1)
        return (dpowers @ C[1:]).reshape(-1, 1)

    return Chart(
        m=1, n=C.shape[1], embed_fn=embed, jac_fn=jac, param_domain=domain, label="polynomial"
    )


def paraboloid_chart(
    m: int, curvature: float = 1.0, offset=None, domain: Optional[ParamBox] = None
) -> Chart:
    """Graph F(p) = offset + (p_1, ..., p_m, curvature * |p|^2) in R^(m+1)."""
    n = m + 1
    shift = np.zeros(n) if offset is None else validate_vector(offset, n, "offset")

    def embed(p: np.ndarray) -> np.ndarray:
        return shift + np.append(p, curvature * float(p @ p))

    def jac(p: np.ndarray) -> np.ndarray:
        return np.vstack([np.eye(m), 2.0 * curvature * p])

    return Chart(m=m, n=n, embed_fn=embed, jac_fn=jac, param_domain=domain, label="paraboloid")


def convex_combination_chart(start, end, domain: Optional[ParamBox] = None) -> Chart:
    """Curve F(p) = (1 - p) A + p B between two fixed states."""
    A = validate_vector(start, name="start")
    B = validate_vector(end, A.shape[0], "end")
    if domain is None:
        domain = ParamBox(np.zeros(1), np.ones(1))
    return Chart(
        m=1,
        n=A.shape[0],
        embed_fn=lambda p: (1.0 - p[0]) * A + p[0] * B,
        jac_fn=lambda p: (B - A).reshape(-1, 1),
        param_domain=domain,
        label="convex_combination",
    )


def circle_chart(center=(0.0, 0.0), radius: float = 1.0) -> Chart:
    """Planar circle F(p) = center + r (cos p, sin p)."""
    c = validate_vector(center, 2, "center")
    return Chart(
        m=1,
        n=2,
        embed_fn=lambda p: c + radius * np.array([math.cos(p[0]), math.sin(p[0])]),
        jac_fn=lambda p: radius * np.array([[-math.sin(p[0])], [math.cos(p[0])]]),
        label="circle",
    )


# Operations


def tangent_frame(chart: Chart, Hfun: LyapunovFunction, p) -> TangentFrame:
    """
    Tangent frame at F(p) with Gram matrix J^T Hes J.

    Raises:
        DimensionMismatch: If the chart and H live in different spaces
        RankDeficient: If the smallest singular value of J is below 1e-8 times the largest
        DomainViolation: If p or F(p) is outside its domain
    """
    if chart.n != Hfun.dim:
        raise DimensionMismatch(f"chart maps into R^{chart.n}, H lives on R^{Hfun.dim}")
    p = chart._checked(p)
    x = chart.embed(p)
    J = chart.jac(p)
    singular_values = np.linalg.svd(J, compute_uv=False)
    if singular_values[0] == 0.0 or singular_values[-1] < RANK_RTOL * singular_values[0]:
        raise RankDeficient(f"{chart.label} chart is not an immersion at p={p.tolist()}")
    metric = metric_at(Hfun, x)
    gram = J.T @ metric.hess @ J
    return TangentFrame(p=p, x=x, basis=J, metric_gram=0.5 * (gram + gram.T), metric=metric)


def restricted_gradient_in_frame(frame: TangentFrame, grad: np.ndarray) -> np.ndarray:
    """Solve Gram c = J^T grad and return g_M = J c."""
    rhs = frame.basis.T @ grad
    coefficients = linalg.cho_solve(linalg.cho_factor(frame.metric_gram), rhs)
    return frame.basis @ coefficients


def restricted_gradient(chart: Chart, Hfun: LyapunovFunction, p) -> np.ndarray:
    """
    Gradient g_M of H restricted to M, in the restricted Shahshahani metric.

    g_M lies in T_x(M) and satisfies <g_M|v>_x = D_x(H)(v) for every tangent v.
    """
    frame = tangent_frame(chart, Hfun, p)
    return restricted_gradient_in_frame(frame, Hfun.grad(frame.x))


def transversality_in_frame(frame: TangentFrame, grad: np.ndarray) -> TransversalityReport:
    diagnostic = float(np.linalg.norm(frame.basis.T @ grad))
    tolerance = TRANSVERSAL_TOL_SCALE * (1.0 + float(np.linalg.norm(grad)))
    return TransversalityReport(transversal=diagnostic >= tolerance, diagnostic=diagnostic)


def transversality_check(chart: Chart, Hfun: LyapunovFunction, p) -> TransversalityReport:
    """True iff |J^T grad H(x)| >= tol_transversal; the diagnostic is that norm."""
    frame = tangent_frame(chart, Hfun, p)
    return transversality_in_frame(frame, Hfun.grad(frame.x))


def unit_tangent_antigradient_in_frame(frame: TangentFrame, grad: np.ndarray) -> np.ndarray:
    report = transversality_in_frame(frame, grad)
    if not report.transversal:
        raise NonTransversal(
            f"dH annuls the tangent space at x={frame.x.tolist()} "
            f"(|J^T grad| = {report.diagnostic:.3e})"
        )
    g_m = restricted_gradient_in_frame(frame, grad)
    # <g_M|g_M>_x = D_x(H)(g_M)
    return -g_m / math.sqrt(float(grad @ g_m))


def unit_tangent_antigradient(chart: Chart, Hfun: LyapunovFunction, p) -> np.ndarray:
    """
    Normalized antigradient nu_W of H_M in the restricted metric.

    Raises:
        NonTransversal: If |J^T grad H(x)| < tol_transversal
    """
    frame = tangent_frame(chart, Hfun, p)
    return unit_tangent_antigradient_in_frame(frame, Hfun.grad(frame.x))

"""
Lyapunov functions and the Shahshahani (Hessian) metric.

This module contains the catalog of Lyapunov functions (quadratic forms and
f-divergences), the metric <y|z>_x = (y, Hes_x(H) z) they induce, and the
gradient of H with respect to that metric.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from constants import (
    CONVEXITY_GRID_POINTS,
    F_DIVERGENCE_UPPER_FACTOR,
    FACTOR_RTOL,
    GRAD_TOL_SCALE,
)
from validators import (
    AtCriticalPoint,
    DimensionMismatch,
    DomainViolation,
    NotPositiveDefinite,
    SingularHessian,
    validate_square_matrix,
    validate_symmetric,
    validate_vector,
)

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], float]
VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Domain:
    """Open set U on which H is defined: a box, optionally with a positivity wall."""

    lower: np.ndarray
    upper: np.ndarray
    positive: bool = False
    upper_label: str = ""

    def contains(self, x: np.ndarray) -> bool:
        if self.positive and np.any(x <= 0):
            return False
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def check(self, x: np.ndarray) -> None:
        if self.positive and np.any(x <= 0):
            raise DomainViolation(f"state {x.tolist()} leaves the positive orthant")
        above = x > self.upper
        if np.any(above):
            bound = str(self.upper.tolist())
            if self.upper_label:
                bound = f"{self.upper_label} = {bound}"
            raise DomainViolation(
                f"state {x.tolist()} exceeds the upper bound {bound} in coordinates "
                f"{np.flatnonzero(above).tolist()}"
            )
        if not np.all(x >= self.lower):
            raise DomainViolation(
                f"state {x.tolist()} lies below the lower bound {self.lower.tolist()}"
            )

    @classmethod
    def whole_space(cls, dim: int) -> "Domain":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))


@dataclass(frozen=True)
class LyapunovFunction:
    """
    Evaluator bundle for a strongly convex Lyapunov function H.

    The value, gradient and Hessian callables are wrapped by methods that check
    the dimension and the domain of every queried state.
    """

    dim: int
    value_fn: ScalarFn
    grad_fn: VectorFn
    hessian_fn: VectorFn
    equilibrium: np.ndarray
    domain: Domain
    convexity_floor: float
    label: str = "custom"

    def _checked(self, x: np.ndarray) -> np.ndarray:
        x = validate_vector(x, self.dim, "state")
        self.domain.check(x)
        return x

    def value(self, x: np.ndarray) -> float:
        return float(self.value_fn(self._checked(x)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.grad_fn(self._checked(x)), dtype=float)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.hessian_fn(self._checked(x)), dtype=float)

    def differential(self, x: np.ndarray, q: np.ndarray) -> float:
        """D_x(H)(Q): derivative of H along the vector Q."""
        return float(self.grad(x) @ validate_vector(q, self.dim, "Q"))

    @property
    def critical_at_equilibrium(self) -> bool:
        """Whether grad(equilibrium) vanishes (false for KL and Burg off the simplex)."""
        return bool(np.linalg.norm(self.grad(self.equilibrium)) <= 1e-10)


@dataclass(frozen=True)
class FDivergenceSpec:
    """Generator f of an f-divergence with its derivatives and the equilibrium x_eq."""

    f: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    x_eq: np.ndarray
    label: str = "custom_f"


@dataclass(frozen=True)
class MetricPoint:
    """Shahshahani metric at a point, with its Cholesky factor for solves."""

    x: np.ndarray
    hess: np.ndarray
    factor: Tuple[np.ndarray, bool] = field(repr=False)

    def inner(self, y: np.ndarray, z: np.ndarray) -> float:
        return float(y @ self.hess @ z)

    def norm(self, y: np.ndarray) -> float:
        return math.sqrt(max(self.inner(y, y), 0.0))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.factor, b)

    def reconstruction_error(self) -> float:
        """Relative error of L L^T against the Hessian."""
        c, lower = self.factor
        tri = np.tril(c) if lower else np.triu(c)
        rebuilt = tri @ tri.T if lower else tri.T @ tri
        scale = max(1.0, float(np.linalg.norm(self.hess)))
        return float(np.linalg.norm(rebuilt - self.hess)) / scale


def metric_at(Hfun: LyapunovFunction, x: np.ndarray) -> MetricPoint:
    """
    Factorize the Shahshahani metric at x.

    Raises:
        DomainViolation: If x is outside the domain of H
        SingularHessian: If the Hessian is not positive definite at x
    """
    x = validate_vector(x, Hfun.dim, "state")
    hess = Hfun.hessian(x)
    try:
        factor = linalg.cho_factor(hess, lower=True)
    except linalg.LinAlgError as e:
        raise SingularHessian(f"Hessian of {Hfun.label} is not positive definite at {x}") from e
    point = MetricPoint(x=x, hess=hess, factor=factor)
    if point.reconstruction_error() > FACTOR_RTOL:
        raise SingularHessian(f"Cholesky factor of {Hfun.label} is inaccurate at {x}")
    return point


def make_quadratic(G, center) -> LyapunovFunction:
    """
    Build H(x) = 1/2 (x - c, G (x - c)), so that the Hessian is exactly G.

    Args:
        G: Symmetric positive definite n x n matrix
        center: Minimizer c

    Returns:
        LyapunovFunction labelled "quadratic"

    Raises:
        NotPositiveDefinite: If G is not symmetric or has a non-positive eigenvalue
        DimensionMismatch: If G and center disagree
    """
    G = validate_square_matrix(G, name="G")
    n = G.shape[0]
    center = validate_vector(center, name="center")
    if center.shape[0] != n:
        raise DimensionMismatch(f"center has length {center.shape[0]}, G is {n}x{n}")
    validate_symmetric(G, "G")
    eigenvalues = np.linalg.eigvalsh(G)
    if eigenvalues[0] <= 0:
        raise NotPositiveDefinite(f"G has non-positive eigenvalue {eigenvalues[0]:.3e}")

    G = G.copy()
    G.setflags(write=False)
    center = center.copy()
    center.setflags(write=False)

    def value(x: np.ndarray) -> float:
        d = x - center
        return 0.5 * float(d @ G @ d)

    return LyapunovFunction(
        dim=n,
        value_fn=value,
        grad_fn=lambda x: G @ (x - center),
        hessian_fn=lambda x: G,
        equilibrium=center,
        domain=Domain.whole_space(n),
        convexity_floor=float(eigenvalues[0]),
        label="quadratic",
    )


def kl_spec(x_eq) -> FDivergenceSpec:
    """Kullback-Leibler generator f(z) = z ln z."""
    return FDivergenceSpec(
        f=lambda z: z * np.log(z),
        f1=lambda z: 1.0 + np.log(z),
        f2=lambda z: 1.0 / z,
        x_eq=validate_vector(x_eq, name="x_eq"),
        label="kl",
    )


def shifted_kl_spec(x_eq) -> FDivergenceSpec:
    """Shifted KL generator f(z) = z (ln z - 1)."""
    return FDivergenceSpec(
        f=lambda z: z * (np.log(z) - 1.0),
        f1=np.log,
        f2=lambda z: 1.0 / z,
        x_eq=validate_vector(x_eq, name="x_eq"),
        label="kl_shifted",
    )


def burg_spec(x_eq) -> FDivergenceSpec:
    """Relative Burg entropy generator f(z) = -ln z."""
    return FDivergenceSpec(
        f=lambda z: -np.log(z),
        f1=lambda z: -1.0 / z,
        f2=lambda z: 1.0 / z**2,
        x_eq=validate_vector(x_eq, name="x_eq"),
        label="burg",
    )


def alpha_spec(x_eq, alpha: float) -> FDivergenceSpec:
    """
    Alpha-divergence generator f(z) = (z^a - a z + a - 1) / (a (a - 1)).

    Convex on z > 0 for every a outside {0, 1}, with f(1) = f'(1) = 0.
    """
    a = float(alpha)
    if a in (0.0, 1.0):
        raise NotPositiveDefinite("alpha must differ from 0 and 1")
    norm = a * (a - 1.0)
    return FDivergenceSpec(
        f=lambda z: (z**a - a * z + a - 1.0) / norm,
        f1=lambda z: (z ** (a - 1.0) - 1.0) / (a - 1.0),
        f2=lambda z: z ** (a - 2.0),
        x_eq=validate_vector(x_eq, name="x_eq"),
        label="custom_f",
    )


def make_f_divergence(spec: FDivergenceSpec) -> LyapunovFunction:
    """
    Build H(x) = sum_i x_eq_i f(x_i / x_eq_i) on the positive orthant.

    The gradient is f'(x_i / x_eq_i) and the Hessian is diagonal with entries
    f''(x_i / x_eq_i) / x_eq_i.

    Raises:
        DomainViolation: If x_eq has a non-positive coordinate
        NotPositiveDefinite: If f'' is not positive on the sampled range
    """
    x_eq = validate_vector(spec.x_eq, name="x_eq").copy()
    if np.any(x_eq <= 0):
        raise DomainViolation(f"x_eq must be positive, got {x_eq.tolist()}")
    x_eq.setflags(write=False)
    n = x_eq.shape[0]

    z = np.logspace(-6, math.log10(F_DIVERGENCE_UPPER_FACTOR), CONVEXITY_GRID_POINTS)
    curvature = np.asarray(spec.f2(z), dtype=float)
    if not np.all(np.isfinite(curvature)) or np.any(curvature <= 0):
        raise NotPositiveDefinite(f"f'' of {spec.label} is not positive on the sampled range")
    floor = float(np.min(curvature) / np.max(x_eq))

    return LyapunovFunction(
        dim=n,
        value_fn=lambda x: float(np.sum(x_eq * spec.f(x / x_eq))),
        grad_fn=lambda x: np.asarray(spec.f1(x / x_eq), dtype=float),
        hessian_fn=lambda x: np.diag(spec.f2(x / x_eq) / x_eq),
        equilibrium=x_eq,
        domain=Domain(
            np.zeros(n),
            F_DIVERGENCE_UPPER_FACTOR * x_eq,
            positive=True,
            upper_label=f"{F_DIVERGENCE_UPPER_FACTOR:g} * x_eq",
        ),
        convexity_floor=floor,
        label=spec.label,
    )


def f_divergence_gradient(spec: FDivergenceSpec, x) -> np.ndarray:
    """Closed-form Shahshahani gradient e_x,i = x_eq_i f'(z_i) / f''(z_i), z = x / x_eq."""
    x = validate_vector(x, spec.x_eq.shape[0], "state")
    if np.any(x <= 0):
        raise DomainViolation(f"state {x.tolist()} leaves the positive orthant")
    z = x / spec.x_eq
    return spec.x_eq * spec.f1(z) / spec.f2(z)


def shahshahani_inner(Hfun: LyapunovFunction, x, y, z) -> float:
    """<y|z>_x = (y, Hes_x(H) z)."""
    y = validate_vector(y, Hfun.dim, "y")
    z = validate_vector(z, Hfun.dim, "z")
    return float(y @ Hfun.hessian(x) @ z)


def tol_grad(Hfun: LyapunovFunction, x: np.ndarray) -> float:
    """Gradient norm below which x is treated as a critical point of H."""
    return GRAD_TOL_SCALE * (1.0 + float(np.linalg.norm(np.asarray(x) - Hfun.equilibrium)))


def shahshahani_gradient(
    Hfun: LyapunovFunction, x, metric: Optional[MetricPoint] = None
) -> np.ndarray:
    """
    Gradient e_x of H in the Shahshahani metric: Hes_x(H) e_x = grad H(x).

    Raises:
        SingularHessian: If the Hessian cannot be factorized
    """
    metric = metric if metric is not None else metric_at(Hfun, x)
    return metric.solve(Hfun.grad(metric.x))


def unit_antigradient(
    Hfun: LyapunovFunction, x, metric: Optional[MetricPoint] = None
) -> np.ndarray:
    """
    Normalized antigradient nu = -e_x / sqrt(<e_x|e_x>_x).

    Raises:
        AtCriticalPoint: If |grad H(x)| < tol_grad
    """
    metric = metric if metric is not None else metric_at(Hfun, x)
    grad = Hfun.grad(metric.x)
    if np.linalg.norm(grad) < tol_grad(Hfun, metric.x):
        raise AtCriticalPoint(f"{Hfun.label} is critical at {metric.x.tolist()}")
    e_x = metric.solve(grad)
    # <e_x|e_x>_x = (grad, e_x)
    return -e_x / math.sqrt(float(grad @ e_x))


def newton_direction_check(Hfun: LyapunovFunction, x) -> float:
    """
    Cosine between -e_x and the Newton step -Hes^{-1} grad H from an independent solve.

    Returns 1 up to rounding: the Shahshahani antigradient is the Newton descent direction.
    """
    metric = metric_at(Hfun, x)
    grad = Hfun.grad(metric.x)
    if np.linalg.norm(grad) < tol_grad(Hfun, metric.x):
        raise AtCriticalPoint(f"{Hfun.label} is critical at {metric.x.tolist()}")
    antigradient = -metric.solve(grad)
    newton_step = -np.linalg.solve(metric.hess, grad)
    return float(
        antigradient @ newton_step / (np.linalg.norm(antigradient) * np.linalg.norm(newton_step))
    )

"""Geometry of the rigid-triangle constraint manifold.

A configuration of the three transmitters is a 3x3 matrix ``X`` whose
columns ``x1, x2, x3`` are the vertex positions in meters.  The feasible
set is carved out by two quadratic constraints with side length ``d``:

    g1(X) = (x1 - x2)' (x2 - x3) + d^2/2 = 0
    g2(X) = (x1 - x3)' (x2 - x3) - d^2/2 = 0

Subtracting the two shows ||x2 - x3|| = d exactly, and their sum places
x1 on the perpendicular bisector plane of the segment [x2, x3].  The set
is therefore the 7-dimensional family of isosceles triangles with base
length d; the equilateral configurations form the slice where the apex
sits at height d*sqrt(3)/2 above the base midpoint.  Least-squares data
from an equilateral array pulls the apex onto that slice, so nothing
here assumes equilaterality.

The embedded geometry uses the trace inner product <A, B> = sum(A * B).
The normal space at X is spanned by ``X @ U(1, 0)`` and ``X @ U(0, 1)``
where ``U(alpha, beta)`` is the symmetric coefficient matrix below; all
projections reduce to a 2x2 Gram solve in (alpha, beta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearSingularGram, OffManifold, RetractionDomain

# Feasibility tolerance for constraint residuals, relative to d^2.
FEAS_TOL = 1e-9

# cos(pi/3), stored exactly so canonical configurations have zero residual.
_HALF = 0.5

_U10 = np.array([[0.0, 1.0, -1.0], [1.0, -2.0, 1.0], [-1.0, 1.0, 0.0]])
_U01 = np.array([[0.0, 1.0, -1.0], [1.0, 0.0, -1.0], [-1.0, -1.0, 2.0]])

# Relative threshold below which the Gram determinant counts as singular.
_GRAM_TOL = 1e-14

# Relative threshold for vanishing denominators inside the retraction.
_RETRACT_TOL = 1e-14


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product <A, B> = sum_ij A_ij B_ij."""
    return float(np.tensordot(a, b))


def coeff_matrix(alpha: float, beta: float) -> np.ndarray:
    """Symmetric coefficient matrix U(alpha, beta) generating normal directions.

    ``X @ coeff_matrix(alpha, beta)`` sweeps the normal space at X as
    (alpha, beta) ranges over R^2.  The map is linear:
    U(a, b) = a * U(1, 0) + b * U(0, 1).
    """
    return alpha * _U10 + beta * _U01


def constraint_residual(x: np.ndarray, d: float) -> tuple[float, float]:
    """Evaluate the two constraint functions at a raw 3x3 configuration.

    Returns (g1, g2); both vanish exactly on the manifold.
    """
    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    w = x2 - x3
    g1 = float((x1 - x2) @ w) + _HALF * d * d
    g2 = float((x1 - x3) @ w) - _HALF * d * d
    return g1, g2


@dataclass(frozen=True)
class TrianglePoint:
    """A feasible transmitter configuration.

    Attributes:
        x: 3x3 float array, columns are the vertex positions (meters).
        d: triangle side length (meters).

    Construction validates the constraint residuals against
    ``FEAS_TOL * d**2`` and rejects the degenerate configuration
    x2 = -x3, which lies outside the retraction domain.
    """

    x: np.ndarray
    d: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.shape != (3, 3) or not np.all(np.isfinite(x)):
            raise OffManifold("configuration must be a finite 3x3 matrix")
        if not (np.isfinite(self.d) and self.d > 0):
            raise OffManifold(f"side length must be positive, got {self.d}")
        object.__setattr__(self, "x", x)
        g1, g2 = constraint_residual(x, self.d)
        tol = FEAS_TOL * self.d * self.d
        if max(abs(g1), abs(g2)) > tol:
            raise OffManifold(
                f"constraint residuals ({g1:.3e}, {g2:.3e}) exceed {tol:.3e}"
            )
        scale = max(float(np.abs(x).max()), self.d)
        if np.linalg.norm(x[:, 1] + x[:, 2]) <= 1e-12 * scale:
            raise OffManifold("x2 = -x3 lies outside the retraction domain")

    @property
    def residual(self) -> tuple[float, float]:
        return constraint_residual(self.x, self.d)


def normal_generators(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two matrices X @ U(1,0), X @ U(0,1) spanning the normal space."""
    return x @ _U10, x @ _U01


def gram_matrix(point: TrianglePoint) -> np.ndarray:
    """2x2 Gram matrix S of the normal-space generators (trace metric).

    S is symmetric positive definite at every valid point; its entries are
    S[0,0] = <N1, N1>, S[0,1] = <N1, N2>, S[1,1] = <N2, N2> with
    N1 = X @ U(1,0) and N2 = X @ U(0,1).
    """
    n1, n2 = normal_generators(point.x)
    s11 = trace_inner(n1, n1)
    s12 = trace_inner(n1, n2)
    s22 = trace_inner(n2, n2)
    return np.array([[s11, s12], [s12, s22]])


def _solve_gram(s: np.ndarray, r1: float, r2: float) -> tuple[float, float]:
    """Solve S @ (a, b) = (r1, r2) by Cramer's rule with a singularity guard."""
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[0, 1]
    tr = s[0, 0] + s[1, 1]
    if det < _GRAM_TOL * tr * tr:
        raise NearSingularGram(
            f"Gram determinant {det:.3e} below {_GRAM_TOL:.0e} * trace^2"
        )
    a = (s[1, 1] * r1 - s[0, 1] * r2) / det
    b = (s[0, 0] * r2 - s[0, 1] * r1) / det
    return a, b


def solve_normal_coeffs(point: TrianglePoint, z: np.ndarray) -> tuple[float, float]:
    """Coefficients (alpha, beta) of the normal component of an ambient matrix Z.

    Solves S (alpha, beta)' = (<Z, N1>, <Z, N2>)'.  The normal component of
    Z is then ``X @ coeff_matrix(alpha, beta)``.

    Raises:
        NearSingularGram: if the Gram system is numerically singular.
    """
    n1, n2 = normal_generators(point.x)
    s = gram_matrix(point)
    return _solve_gram(s, trace_inner(z, n1), trace_inner(z, n2))


def tangent_project(point: TrianglePoint, z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an ambient 3x3 matrix onto the tangent space."""
    alpha, beta = solve_normal_coeffs(point, z)
    return z - point.x @ coeff_matrix(alpha, beta)


def constraint_derivative(point: TrianglePoint, xi: np.ndarray) -> tuple[float, float]:
    """Directional derivative (Dg1[xi], Dg2[xi]) of the constraints at a point.

    Vanishes exactly when xi is tangent.  The identity
    Dg_k[Z] = <Z, N_k> makes this a pair of trace inner products.
    """
    n1, n2 = normal_generators(point.x)
    return trace_inner(xi, n1), trace_inner(xi, n2)


def riemannian_gradient(point: TrianglePoint, egrad: np.ndarray) -> np.ndarray:
    """Riemannian gradient: tangent projection of the Euclidean gradient."""
    return tangent_project(point, egrad)


def riemannian_hessian(
    point: TrianglePoint,
    egrad: np.ndarray,
    ehess_xi: np.ndarray,
    xi: np.ndarray,
) -> np.ndarray:
    """Riemannian Hessian applied to a tangent direction.

    Args:
        point: base point X.
        egrad: Euclidean gradient of the cost at X.
        ehess_xi: Euclidean Hessian of the cost at X applied to xi.
        xi: tangent direction at X.

    Returns:
        The tangent matrix Hess f(X)[xi].

    Differentiating the gradient field grad f = egrad - X U(alpha, beta)
    along xi gives

        Hess f[xi] = P_X( ehess_xi - xi U(alpha, beta) - X U(alpha', beta') )

    where (alpha, beta) solve the Gram system for egrad and the derivative
    coefficients solve S (alpha', beta')' = r' - S' (alpha, beta)' with
    S' and r' the directional derivatives of the Gram matrix and of the
    right-hand side along xi.
    """
    x = point.x
    n1, n2 = normal_generators(x)
    s = gram_matrix(point)
    alpha, beta = _solve_gram(s, trace_inner(egrad, n1), trace_inner(egrad, n2))

    m1, m2 = normal_generators(xi)  # directional derivatives of N1, N2
    sdot11 = 2.0 * trace_inner(m1, n1)
    sdot12 = trace_inner(m2, n1) + trace_inner(n2, m1)
    sdot22 = 2.0 * trace_inner(m2, n2)

    rdot1 = trace_inner(ehess_xi, n1) + trace_inner(egrad, m1)
    rdot2 = trace_inner(ehess_xi, n2) + trace_inner(egrad, m2)

    rhs1 = rdot1 - (sdot11 * alpha + sdot12 * beta)
    rhs2 = rdot2 - (sdot12 * alpha + sdot22 * beta)
    adot, bdot = _solve_gram(s, rhs1, rhs2)

    ambient = ehess_xi - xi @ coeff_matrix(alpha, beta) - x @ coeff_matrix(adot, bdot)
    return tangent_project(point, ambient)


def retract(point: TrianglePoint, xi: np.ndarray) -> TrianglePoint:
    """Second-order retraction: map X + xi back onto the manifold.

    Writes Z = X + xi with columns z1, z2, z3 and w = z2 - z3.  The first
    two coordinates of z1 are rescaled by gamma so that the corrected
    point satisfies g1 + g2 = 0, then the whole configuration is scaled
    by sqrt(d^2/2 / lambda) with lambda = (u1 - z3)' w to pin the
    constraint magnitude.  Exact on the manifold: retract(X, 0) = X up to
    roundoff.

    Raises:
        RetractionDomain: if Z has z2 = +-z3, the gamma denominator
            vanishes with z1 != 0, lambda <= 0, or the assembled point
            fails validation.  Callers (line searches, trust regions)
            should shrink the step and retry.
    """
    d = point.d
    z = point.x + xi
    if not np.all(np.isfinite(z)):
        raise RetractionDomain("non-finite retraction argument")
    z1 = z[:, 0].copy()
    z2 = z[:, 1]
    z3 = z[:, 2]
    w = z2 - z3
    zscale = float(np.tensordot(z, z))
    if zscale <= 0.0:
        raise RetractionDomain("zero configuration")
    wnorm2 = float(w @ w)
    if wnorm2 <= _RETRACT_TOL * zscale or float((z2 + z3) @ (z2 + z3)) <= _RETRACT_TOL * zscale:
        raise RetractionDomain("z2 = +-z3: base edge collapsed")

    denom = 2.0 * (z1[0] * w[0] + z1[1] * w[1])
    if abs(denom) <= _RETRACT_TOL * zscale:
        z1norm = float(np.linalg.norm(z1))
        if z1norm <= _RETRACT_TOL * np.sqrt(zscale):
            gamma = 1.0  # apex at the origin: leave it there
        else:
            raise RetractionDomain("gamma denominator vanished")
    else:
        num = float((z2 + z3) @ w) - 2.0 * float(z1 @ w)
        gamma = num / denom + 1.0

    u1 = z1
    u1[0] *= gamma
    u1[1] *= gamma
    lam = float((u1 - z3) @ w)
    if lam <= 0.0:
        raise RetractionDomain(f"lambda = {lam:.3e} <= 0")
    scale = np.sqrt(_HALF * d * d / lam)
    out = scale * np.column_stack([u1, z2, z3])
    try:
        return TrianglePoint(out, d)
    except OffManifold as exc:
        raise RetractionDomain(f"retracted point failed validation: {exc}") from exc


def vector_transport(
    point: TrianglePoint, eta: np.ndarray, xi: np.ndarray
) -> tuple[TrianglePoint, np.ndarray]:
    """Transport tangent xi from X to the retracted point R_X(eta) by projection.

    Returns (new_point, transported_xi).
    """
    new_point = retract(point, eta)
    return new_point, tangent_project(new_point, xi)


def random_point(d: float, rng: np.random.Generator) -> TrianglePoint:
    """Draw a uniformly random feasible triangle of side d centred at the origin.

    Scales a Haar-uniform orthonormal frame by d * sqrt(1/2); orthonormality
    of the columns makes both constraint residuals vanish identically.
    """
    g = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(g)
    q = q * np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return TrianglePoint(d * np.sqrt(_HALF) * q, d)


def random_tangent(
    point: TrianglePoint, rng: np.random.Generator, norm: float | None = None
) -> np.ndarray:
    """Random tangent direction at a point, optionally rescaled to a given norm."""
    xi = tangent_project(point, rng.standard_normal((3, 3)))
    if norm is not None:
        n = np.linalg.norm(xi)
        if n > 0:
            xi = xi * (norm / n)
    return xi

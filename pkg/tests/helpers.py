"""Shared test utilities: finite-difference oracles and synthetic costs.

The oracles here are deliberately independent of the closed-form code
paths they check: they only use cost/constraint *values* (plus the
retraction for curve-based derivatives), never the analytic gradients.
"""

from __future__ import annotations

import numpy as np

from triloc.manifold import TrianglePoint, retract, tangent_project, trace_inner


def loglog_slope(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errs)), 1)[0])


def fd_directional_cost(cost_value, point: TrianglePoint, xi, h: float) -> float:
    """Central difference of t -> cost(retract(point, t*xi)) at t = 0."""
    fp = cost_value(retract(point, h * xi).x)
    fm = cost_value(retract(point, -h * xi).x)
    return (fp - fm) / (2.0 * h)


def fd_riemannian_gradient_check(cost_value, point, rgrad, xi, h=1e-6) -> float:
    """Relative mismatch between <rgrad, xi> and the curve derivative."""
    fd = fd_directional_cost(cost_value, point, xi, h)
    an = trace_inner(rgrad, xi)
    scale = max(abs(an), abs(fd), 1e-30)
    return abs(an - fd) / scale


def fd_riemannian_hessian(cost_egrad, point, xi, h: float) -> np.ndarray:
    """Central difference of the Riemannian gradient field along the retraction.

    Evaluates the Riemannian gradient at R_X(+-h xi), transports both back
    to X by projection, and differences them; converges to Hess f(X)[xi]
    with O(h^2) error.
    """
    xp = retract(point, h * xi)
    xm = retract(point, -h * xi)
    gp = tangent_project(point, tangent_project(xp, cost_egrad(xp.x)))
    gm = tangent_project(point, tangent_project(xm, cost_egrad(xm.x)))
    return (gp - gm) / (2.0 * h)


def make_quartic_cost(rng: np.random.Generator):
    """Synthetic smooth cost f(X) = <C,X> + 0.5||BX||^2 + ||X||^4.

    Returns (value, egrad, ehess_apply) closures with hand-derived
    derivatives; used to exercise the manifold machinery independently
    of the localization objective.
    """
    c = rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3))
    btb = b.T @ b

    def value(x):
        n2 = float(np.tensordot(x, x))
        return float(np.tensordot(c, x)) + 0.5 * float(np.tensordot(b @ x, b @ x)) + n2 * n2

    def egrad(x):
        n2 = float(np.tensordot(x, x))
        return c + btb @ x + 4.0 * n2 * x

    def ehess_apply(x, v):
        n2 = float(np.tensordot(x, x))
        return btb @ v + 8.0 * float(np.tensordot(x, v)) * x + 4.0 * n2 * v

    return value, egrad, ehess_apply

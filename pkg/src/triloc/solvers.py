"""Solvers for the constrained localization problem.

Three Riemannian iterations (steepest descent, Newton, trust region) run
directly on the triangle manifold; the unconstrained Gauss-Newton
trilateration baseline and the projected initialization bridge into them.
All manifold solvers guarantee feasible iterates by construction: every
accepted point passes through the retraction and the TrianglePoint
validation it performs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import OffManifold, RetractionDomain, SingularGeometry
from .manifold import (
    FEAS_TOL,
    TrianglePoint,
    constraint_residual,
    random_point,
    retract,
    riemannian_hessian,
    tangent_project,
    trace_inner,
)
from .objective import BeaconSet, MeasurementSet, SmoothCost, projection_cost


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAILURE = "line_search_failure"
    RETRACTION_FAILURE = "retraction_failure"


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs; trust-region radii default to fractions of d."""

    max_iters: int = 1000
    grad_tol: float = 1e-10
    step_tol: float = 1e-16
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    backtrack_factor: float = 0.5
    max_adjustments: int = 50
    tr_initial_radius: float | None = None  # None -> 0.1 * d
    tr_max_radius: float | None = None  # None -> d
    tr_accept_ratio: float = 0.1
    keep_point_trace: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.max_iters < 1 or self.max_adjustments < 1:
            raise ValueError("iteration budgets must be positive")


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one solver run."""

    final_point: TrianglePoint
    status: SolverStatus
    iterations: int
    final_grad_norm: float
    cost_trace: tuple[float, ...]
    wall_time: float
    point_trace: tuple[TrianglePoint, ...] | None = None


class _LineSearchFailed(Exception):
    def __init__(self, retraction_only: bool):
        self.retraction_only = retraction_only


def _wolfe_search(cost, point, xi, f0, slope, cfg, t_init):
    """Backtracking search along t -> retract(point, t * xi).

    Accepts the first step satisfying the sufficient-decrease condition,
    then verifies the curvature condition on the pulled-back gradient and
    expands the step once if the slope is still too steep.  Raises
    _LineSearchFailed after cfg.max_adjustments shrinks.
    """
    t = t_init
    adjustments = 0
    armijo_evaluated = False
    while adjustments <= cfg.max_adjustments:
        try:
            cand = retract(point, t * xi)
        except RetractionDomain:
            t *= cfg.backtrack_factor
            adjustments += 1
            continue
        armijo_evaluated = True
        f_new = cost.value(cand.x)
        # strict inequality: at the floating-point floor of the cost no
        # acceptable step exists and the search reports failure instead
        # of accepting zero-progress steps
        if np.isfinite(f_new) and f_new < f0 + cfg.wolfe_c1 * t * slope:
            g_new = tangent_project(cand, cost.euclidean_gradient(cand.x))
            slope_new = trace_inner(g_new, tangent_project(cand, xi))
            if slope_new < cfg.wolfe_c2 * slope and adjustments < cfg.max_adjustments:
                # Curvature condition violated: the step is too short.
                adjustments += 1
                t_long = t / cfg.backtrack_factor
                try:
                    cand_long = retract(point, t_long * xi)
                    f_long = cost.value(cand_long.x)
                    if np.isfinite(f_long) and f_long < f0 + cfg.wolfe_c1 * t_long * slope:
                        return cand_long, f_long, t_long
                except RetractionDomain:
                    pass
            return cand, f_new, t
        t *= cfg.backtrack_factor
        adjustments += 1
    raise _LineSearchFailed(retraction_only=not armijo_evaluated)


def _finish(x, status, iters, gnorm, trace, t0, pts):
    return SolverReport(
        final_point=x,
        status=status,
        iterations=iters,
        final_grad_norm=float(gnorm),
        cost_trace=tuple(trace),
        wall_time=time.perf_counter() - t0,
        point_trace=tuple(pts) if pts is not None else None,
    )


def riemannian_steepest_descent(
    cost: SmoothCost, x0: TrianglePoint, cfg: SolverConfig | None = None
) -> SolverReport:
    """Steepest descent along normalized Riemannian gradients.

    Each iteration retracts along xi = -grad/||grad|| with a Wolfe
    backtracking search; stops on gradient norm, step size, or the
    iteration budget.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    x = x0
    f = cost.value(x.x)
    trace = [f]
    pts = [x] if cfg.keep_point_trace else None
    t_prev = 1.0
    iters = 0
    while True:
        g = tangent_project(x, cost.euclidean_gradient(x.x))
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol:
            return _finish(x, SolverStatus.CONVERGED, iters, gnorm, trace, t0, pts)
        if iters >= cfg.max_iters:
            return _finish(x, SolverStatus.MAX_ITERS, iters, gnorm, trace, t0, pts)
        xi = -g / gnorm
        try:
            x, f, t_prev = _wolfe_search(
                cost, x, xi, f, -gnorm, cfg, t_init=min(1.0, 2.0 * t_prev)
            )
        except _LineSearchFailed as exc:
            status = (
                SolverStatus.RETRACTION_FAILURE
                if exc.retraction_only
                else SolverStatus.LINE_SEARCH_FAILURE
            )
            return _finish(x, status, iters, gnorm, trace, t0, pts)
        iters += 1
        trace.append(f)
        if pts is not None:
            pts.append(x)
        if t_prev <= cfg.step_tol:
            g = tangent_project(x, cost.euclidean_gradient(x.x))
            gnorm = float(np.linalg.norm(g))
            status = (
                SolverStatus.CONVERGED
                if gnorm <= cfg.grad_tol
                else SolverStatus.LINE_SEARCH_FAILURE
            )
            return _finish(x, status, iters, gnorm, trace, t0, pts)


def tangent_basis(point: TrianglePoint) -> np.ndarray:
    """Orthonormal basis of the tangent space as a 9 x dim matrix.

    Projects the nine ambient coordinate directions and extracts an
    orthonormal span by SVD; the dimension is 7 at every valid point.
    """
    cols = np.empty((9, 9))
    for k in range(9):
        e = np.zeros(9)
        e[k] = 1.0
        cols[:, k] = tangent_project(point, e.reshape(3, 3)).ravel()
    u, s, _ = np.linalg.svd(cols)
    dim = int(np.sum(s > 1e-10 * s[0]))
    return u[:, :dim]


def riemannian_newton(
    cost: SmoothCost, x0: TrianglePoint, cfg: SolverConfig | None = None
) -> SolverReport:
    """Damped Newton iteration on the manifold.

    Solves the Newton system in an orthonormal tangent basis; when the
    reduced Hessian is not positive definite (or produces an ascent
    direction) the step falls back to steepest descent.  A unit-step
    Armijo backtrack keeps global decrease while preserving the local
    quadratic rate.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    x = x0
    f = cost.value(x.x)
    trace = [f]
    pts = [x] if cfg.keep_point_trace else None
    iters = 0
    t_prev = 1.0
    while True:
        eg = cost.euclidean_gradient(x.x)
        g = tangent_project(x, eg)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= cfg.grad_tol:
            return _finish(x, SolverStatus.CONVERGED, iters, gnorm, trace, t0, pts)
        if iters >= cfg.max_iters:
            return _finish(x, SolverStatus.MAX_ITERS, iters, gnorm, trace, t0, pts)

        basis = tangent_basis(x)
        dim = basis.shape[1]
        reduced = np.empty((dim, dim))
        for j in range(dim):
            bj = basis[:, j].reshape(3, 3)
            hbj = riemannian_hessian(x, eg, cost.euclidean_hessian_apply(x.x, bj), bj)
            reduced[:, j] = basis.T @ hbj.ravel()
        reduced = 0.5 * (reduced + reduced.T)
        g_reduced = basis.T @ g.ravel()

        xi = None
        try:
            chol = scipy.linalg.cho_factor(reduced)
            step = scipy.linalg.cho_solve(chol, -g_reduced)
            candidate = (basis @ step).reshape(3, 3)
            if trace_inner(candidate, g) < 0.0:
                xi = candidate
        except scipy.linalg.LinAlgError:
            xi = None

        if xi is not None:
            slope = trace_inner(xi, g)
            t_init = 1.0
        else:
            xi = -g / gnorm
            slope = -gnorm
            t_init = min(1.0, 2.0 * t_prev)
        try:
            x, f, t_prev = _wolfe_search(cost, x, xi, f, slope, cfg, t_init=t_init)
        except _LineSearchFailed as exc:
            status = (
                SolverStatus.RETRACTION_FAILURE
                if exc.retraction_only
                else SolverStatus.LINE_SEARCH_FAILURE
            )
            return _finish(x, status, iters, gnorm, trace, t0, pts)
        iters += 1
        trace.append(f)
        if pts is not None:
            pts.append(x)
        if t_prev * float(np.linalg.norm(xi)) <= cfg.step_tol:
            g = tangent_project(x, cost.euclidean_gradient(x.x))
            gnorm = float(np.linalg.norm(g))
            status = (
                SolverStatus.CONVERGED
                if gnorm <= cfg.grad_tol
                else SolverStatus.LINE_SEARCH_FAILURE
            )
            return _finish(x, status, iters, gnorm, trace, t0, pts)


def _truncated_cg(point, g, hess_apply, delta, maxinner, kappa=0.1, theta=1.0):
    """Steihaug-Toint truncated CG for the trust-region subproblem.

    Minimizes <g, eta> + 0.5 <eta, H eta> over ||eta|| <= delta.  Returns
    (eta, H eta, hit_boundary).
    """
    eta = np.zeros((3, 3))
    heta = np.zeros((3, 3))
    r = g.copy()
    r_r = trace_inner(r, r)
    norm_r0 = np.sqrt(r_r)
    d = -r

    def to_boundary(eta, d):
        ed = trace_inner(eta, d)
        dd = trace_inner(d, d)
        ee = trace_inner(eta, eta)
        tau = (-ed + np.sqrt(ed * ed + dd * (delta * delta - ee))) / dd
        return tau

    for _ in range(maxinner):
        hd = hess_apply(d)
        d_hd = trace_inner(d, hd)
        if d_hd <= 0.0:
            tau = to_boundary(eta, d)
            return eta + tau * d, heta + tau * hd, True
        alpha = r_r / d_hd
        eta_new = eta + alpha * d
        if np.linalg.norm(eta_new) >= delta:
            tau = to_boundary(eta, d)
            return eta + tau * d, heta + tau * hd, True
        eta = eta_new
        heta = heta + alpha * hd
        r = r + alpha * hd
        r_r_new = trace_inner(r, r)
        if np.sqrt(r_r_new) <= norm_r0 * min(kappa, norm_r0**theta):
            return eta, heta, False
        beta = r_r_new / r_r
        r_r = r_r_new
        d = -r + beta * d
    return eta, heta, False


def riemannian_trust_region(
    cost: SmoothCost, x0: TrianglePoint, cfg: SolverConfig | None = None
) -> SolverReport:
    """Trust-region iteration with an exact-Hessian truncated-CG subproblem.

    Classical radius management: reject below the acceptance ratio,
    shrink by 4 when the model fit is poor, double (up to the cap) when
    the model fits well and the step hit the boundary.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    x = x0
    delta_max = cfg.tr_max_radius if cfg.tr_max_radius is not None else x0.d
    delta = (
        cfg.tr_initial_radius if cfg.tr_initial_radius is not None else 0.1 * x0.d
    )
    f = cost.value(x.x)
    trace = [f]
    pts = [x] if cfg.keep_point_trace else None
    iters = 0
    retraction_rejects = 0
    floor_streak = 0
    eps = np.finfo(float).eps
    while True:
        eg = cost.euclidean_gradient(x.x)
        g = tangent_project(x, eg)
        gnorm = float(np.linalg.norm(g))
        stalled = (
            SolverStatus.CONVERGED
            if gnorm <= cfg.grad_tol
            else SolverStatus.LINE_SEARCH_FAILURE
        )
        if gnorm <= cfg.grad_tol:
            return _finish(x, SolverStatus.CONVERGED, iters, gnorm, trace, t0, pts)
        if iters >= cfg.max_iters:
            return _finish(x, SolverStatus.MAX_ITERS, iters, gnorm, trace, t0, pts)
        if floor_streak >= 3 or delta <= 1e-15 * x.d:
            # Proposed steps no longer produce resolvable cost changes:
            # the iterate sits at the floating-point floor of the cost.
            return _finish(x, stalled, iters, gnorm, trace, t0, pts)

        def hess_apply(v, _x=x, _eg=eg):
            return riemannian_hessian(
                _x, _eg, cost.euclidean_hessian_apply(_x.x, v), v
            )

        eta, heta, hit_boundary = _truncated_cg(
            x, g, hess_apply, delta, maxinner=7
        )
        iters += 1
        try:
            cand = retract(x, eta)
        except RetractionDomain:
            delta /= 4.0
            retraction_rejects += 1
            if retraction_rejects >= 30:
                return _finish(
                    x, SolverStatus.RETRACTION_FAILURE, iters, gnorm, trace, t0, pts
                )
            continue
        retraction_rejects = 0
        f_new = cost.value(cand.x)
        model_decrease = -(trace_inner(g, eta) + 0.5 * trace_inner(eta, heta))
        reg = eps * max(1.0, abs(f))
        rho = (f - f_new + reg) / (model_decrease + reg)
        accept = (
            np.isfinite(f_new)
            and rho > cfg.tr_accept_ratio
            and f_new <= f
            and model_decrease > 0.0
        )
        if rho < 0.25 or not accept:
            delta /= 4.0
        elif rho > 0.75 and hit_boundary:
            delta = min(2.0 * delta, delta_max)
        unresolved = np.isfinite(f_new) and abs(f - f_new) <= 1e-12 * max(
            abs(f), abs(f_new)
        )
        floor_streak = floor_streak + 1 if unresolved else 0
        if accept:
            x = cand
            f = f_new
            trace.append(f)
            if pts is not None:
                pts.append(x)


def gauss_newton_trilateration(
    beacons: BeaconSet, meas: MeasurementSet, iters: int = 50
) -> np.ndarray:
    """Unconstrained per-transmitter trilateration baseline.

    A linear solve of [A | -1/2] (x; ||x||^2) = y seeds each transmitter,
    then Gauss-Newton refines the nonlinear range residuals
    ||x - b_j|| - r_j.  Returns a raw 3x3 configuration (columns), which
    generally does not satisfy the triangle constraints.

    Raises:
        SingularGeometry: if the lifted beacon matrix is rank deficient
            (coplanar beacons).
    """
    a = beacons.a_matrix
    lifted = np.hstack([a, -0.5 * np.ones((4, 1))])
    if np.linalg.cond(lifted) > 1e12:
        raise SingularGeometry("lifted beacon matrix is rank deficient")
    out = np.empty((3, 3))
    for i in range(3):
        x = np.linalg.solve(lifted, meas.y[i])[:3]
        for _ in range(iters):
            diff = x[None, :] - a
            dist = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
            res = dist - meas.ranges[i]
            jac = diff / dist[:, None]
            step, *_ = np.linalg.lstsq(jac, res, rcond=None)
            x = x - step
            if float(np.linalg.norm(step)) <= 1e-14:
                break
        out[:, i] = x
    return out


def _feasible_snap(x: np.ndarray, d: float) -> TrianglePoint | None:
    """Deterministic projection-flavoured repair of a raw configuration.

    Rescales the base edge to length d about its midpoint and drops the
    apex onto the perpendicular bisector plane; both constraints then
    hold exactly.  Returns None when the configuration is too degenerate
    to repair.
    """
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    w = x2 - x3
    wn = float(np.linalg.norm(w))
    if wn <= 1e-9 * max(d, float(np.abs(x).max())):
        return None
    mid = 0.5 * (x2 + x3)
    unit = w / wn
    new2 = mid + 0.5 * d * unit
    new3 = mid - 0.5 * d * unit
    new1 = x1 - float((x1 - mid) @ unit) * unit
    try:
        return TrianglePoint(np.column_stack([new1, new2, new3]), d)
    except OffManifold:
        return None


def improved_init(
    beacons: BeaconSet,
    meas: MeasurementSet,
    d: float,
    cfg: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    gn_iters: int = 50,
) -> TrianglePoint:
    """Feasible starting point: Gauss-Newton followed by manifold projection.

    If the Gauss-Newton output already satisfies the constraints it is
    returned unchanged.  Otherwise the squared-distance cost to it is
    minimized over the manifold by steepest descent from two starting
    points (a deterministic edge/apex repair and a random triangle
    translated to the Gauss-Newton centroid); the lower-cost result wins.
    """
    cfg = cfg or SolverConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    raw = gauss_newton_trilateration(beacons, meas, iters=gn_iters)
    g1, g2 = constraint_residual(raw, d)
    if max(abs(g1), abs(g2)) <= FEAS_TOL * d * d:
        try:
            return TrianglePoint(raw, d)
        except OffManifold:
            pass
    cost = projection_cost(raw)
    starts = []
    snap = _feasible_snap(raw, d)
    if snap is not None:
        starts.append(snap)
    centroid = raw.mean(axis=1)
    rand = random_point(d, rng)
    try:
        starts.append(TrianglePoint(rand.x + centroid[:, None], d))
    except OffManifold:
        starts.append(rand)
    best_point = None
    best_value = np.inf
    for start in starts:
        report = riemannian_steepest_descent(cost, start, cfg)
        value = cost.value(report.final_point.x)
        if value < best_value:
            best_value = value
            best_point = report.final_point
    return best_point

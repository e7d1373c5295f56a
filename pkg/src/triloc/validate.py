"""Self-check suite for the geometry primitives.

Backs the `validate` CLI subcommand: a fixed registry of seeded property
checks over random manifold points (projector algebra, retraction
feasibility and order of accuracy, derivative oracles). Each check reports
its worst observed metric against a budget; the suite passes only if every
check does.

All manifold calls go through the module object (``manifold.tangent_project``
etc.), so a deliberately broken primitive injected by a test harness is
picked up rather than a stale local binding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import manifold
from .objective import BeaconSet, MeasurementSet, localization_cost, true_ranges

_SEED = 20240613
_N_POINTS = 30
_D = 0.1


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named check: worst metric vs its budget."""

    name: str
    passed: bool
    worst: float
    budget: float
    elapsed_s: float
    detail: str = ""


def _points(rng, n=_N_POINTS, d=_D):
    return [manifold.random_point(d, rng) for _ in range(n)]


def _reference_cost():
    # Localization cost with exact ranges to a generic off-origin triangle;
    # random manifold points near the origin are far from the minimizer, so
    # gradients and Hessians are exercised at non-trivial magnitudes.
    beacons = BeaconSet(
        np.array([[0.0, 0.0, 3.0], [4.0, 0.0, 3.0], [0.0, 4.0, 3.0], [4.0, 4.0, 0.0]])
    )
    apex = 1.0 + 0.05 * np.sqrt(3.0)
    target = np.array([[2.0, 2.1, 2.05], [2.0, 2.0, 2.0], [1.0, 1.0, apex]])
    ranges = true_ranges(beacons, target)
    return localization_cost(beacons, MeasurementSet.from_ranges(beacons, ranges))


def _loglog_slope(hs, errs) -> float:
    return float(np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errs)), 1)[0])


def check_projection_idempotent(rng) -> tuple[float, float]:
    worst = 0.0
    for p in _points(rng):
        z = rng.standard_normal((3, 3))
        pz = manifold.tangent_project(p, z)
        ppz = manifold.tangent_project(p, pz)
        scale = max(np.linalg.norm(pz), 1e-30)
        worst = max(worst, np.linalg.norm(ppz - pz) / scale)
    return worst, 1e-12


def check_projection_self_adjoint(rng) -> tuple[float, float]:
    worst = 0.0
    for p in _points(rng):
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3))
        lhs = manifold.trace_inner(manifold.tangent_project(p, a), b)
        rhs = manifold.trace_inner(a, manifold.tangent_project(p, b))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30))
    return worst, 1e-12


def check_projection_tangency(rng) -> tuple[float, float]:
    worst = 0.0
    for p in _points(rng):
        pz = manifold.tangent_project(p, rng.standard_normal((3, 3)))
        d1, d2 = manifold.constraint_derivative(p, pz)
        worst = max(worst, max(abs(d1), abs(d2)) / max(np.linalg.norm(pz), 1e-30))
    return worst, 1e-9


def check_retraction_feasibility(rng) -> tuple[float, float]:
    worst = 0.0
    for p in _points(rng):
        for norm in (0.01 * p.d, 0.1 * p.d, 0.5 * p.d):
            xi = manifold.random_tangent(p, rng, norm=norm)
            try:
                out = manifold.retract(p, xi)
            except manifold.RetractionDomain:
                continue
            g1, g2 = out.residual
            worst = max(worst, max(abs(g1), abs(g2)) / (p.d * p.d))
    return worst, 1e-12


def check_retraction_identity(rng) -> tuple[float, float]:
    # Absolute bound at the d = 0.1 scale: gamma amplifies roundoff when its
    # denominator is small, so a relative bound would be misleadingly tight.
    worst = 0.0
    for p in _points(rng, n=10):
        out = manifold.retract(p, np.zeros((3, 3)))
        worst = max(worst, float(np.linalg.norm(out.x - p.x)))
    return worst, 1e-14


def check_retraction_order(rng) -> tuple[float, float]:
    # || retract(X, h xi) - (X + h xi) || must shrink as h^2.  Individual
    # 3-point fits carry O(h) bias from the cubic term (up to ~0.2 in the
    # slope for unlucky directions), so the measured order is the median
    # slope over the sample rather than the worst single fit.
    hs = np.array([1e-2, 1e-3, 1e-4])
    slopes = []
    for p in _points(rng, n=10):
        xi = manifold.random_tangent(p, rng, norm=p.d)
        errs = []
        for h in hs:
            out = manifold.retract(p, h * xi)
            errs.append(np.linalg.norm(out.x - p.x - h * xi))
        slopes.append(_loglog_slope(hs, errs))
    return abs(float(np.median(slopes)) - 2.0), 0.1


def check_gradient_fd(rng) -> tuple[float, float]:
    cost = _reference_cost()
    h = 1e-6
    worst = 0.0
    for p in _points(rng):
        g = manifold.riemannian_gradient(p, cost.euclidean_gradient(p.x))
        xi = manifold.random_tangent(p, rng, norm=1.0)
        fp = cost.value(manifold.retract(p, h * xi).x)
        fm = cost.value(manifold.retract(p, -h * xi).x)
        fd = (fp - fm) / (2.0 * h)
        an = manifold.trace_inner(g, xi)
        worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-30))
    return worst, 1e-5


def check_hessian_self_adjoint(rng) -> tuple[float, float]:
    cost = _reference_cost()
    worst = 0.0
    for p in _points(rng):
        g = cost.euclidean_gradient(p.x)
        xi = manifold.random_tangent(p, rng, norm=1.0)
        eta = manifold.random_tangent(p, rng, norm=1.0)
        hxi = manifold.riemannian_hessian(p, g, cost.euclidean_hessian_apply(p.x, xi), xi)
        heta = manifold.riemannian_hessian(p, g, cost.euclidean_hessian_apply(p.x, eta), eta)
        lhs = manifold.trace_inner(hxi, eta)
        rhs = manifold.trace_inner(xi, heta)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-12))
    return worst, 1e-8


def check_hessian_fd_order(rng) -> tuple[float, float]:
    # Central differences of the projected gradient along retraction curves
    # converge to the Hessian-vector product at second order.
    cost = _reference_cost()
    hs = np.array([1e-3, 3e-4, 1e-4])
    worst = 0.0
    for p in _points(rng, n=10):
        xi = manifold.random_tangent(p, rng, norm=p.d)
        hxi = manifold.riemannian_hessian(
            p, cost.euclidean_gradient(p.x), cost.euclidean_hessian_apply(p.x, xi), xi
        )
        errs = []
        for h in hs:
            xp = manifold.retract(p, h * xi)
            xm = manifold.retract(p, -h * xi)
            gp = manifold.tangent_project(
                p, manifold.tangent_project(xp, cost.euclidean_gradient(xp.x))
            )
            gm = manifold.tangent_project(
                p, manifold.tangent_project(xm, cost.euclidean_gradient(xm.x))
            )
            errs.append(np.linalg.norm((gp - gm) / (2.0 * h) - hxi))
        worst = max(worst, abs(_loglog_slope(hs, errs) - 2.0))
    return worst, 0.2


def check_gradient_normal_to_generators(rng) -> tuple[float, float]:
    cost = _reference_cost()
    worst = 0.0
    for p in _points(rng):
        g = manifold.riemannian_gradient(p, cost.euclidean_gradient(p.x))
        n1, n2 = manifold.normal_generators(p.x)
        for nk in (n1, n2):
            scale = max(np.linalg.norm(g) * np.linalg.norm(nk), 1e-30)
            worst = max(worst, abs(manifold.trace_inner(g, nk)) / scale)
    return worst, 1e-12


CHECKS = (
    ("projection idempotent", check_projection_idempotent),
    ("projection self-adjoint", check_projection_self_adjoint),
    ("projection output tangent", check_projection_tangency),
    ("retraction feasibility", check_retraction_feasibility),
    ("retraction identity at zero", check_retraction_identity),
    ("retraction order (slope 2)", check_retraction_order),
    ("gradient vs finite difference", check_gradient_fd),
    ("hessian self-adjoint", check_hessian_self_adjoint),
    ("hessian FD order (slope 2)", check_hessian_fd_order),
    ("gradient normal to generators", check_gradient_normal_to_generators),
)


def run_checks(seed: int = _SEED) -> list[CheckResult]:
    """Run every registered check with a fresh seeded generator each."""
    results = []
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        start = time.perf_counter()
        try:
            worst, budget = fn(rng)
            passed = bool(worst <= budget)
            detail = ""
        except Exception as exc:  # a crash is a failure, not an abort
            worst, budget = float("inf"), float("nan")
            passed = False
            detail = f"{type(exc).__name__}: {exc}"
        results.append(
            CheckResult(name, passed, float(worst), float(budget),
                        time.perf_counter() - start, detail)
        )
    return results


def render_table(results: list[CheckResult]) -> str:
    """Fixed-width pass/fail table for terminal output."""
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  {'worst':>12}  {'budget':>12}  result"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{r.name:<{width}}  {r.worst:>12.3e}  {r.budget:>12.3e}  {status}"
        if r.detail:
            line += f"  ({r.detail})"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    total = sum(r.elapsed_s for r in results)
    verdict = "all checks passed" if n_fail == 0 else f"{n_fail} check(s) FAILED"
    lines.append(f"{verdict} in {total:.2f}s")
    return "\n".join(lines)

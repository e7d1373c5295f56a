"""Localization and projection objective checks against FD oracles."""

import numpy as np
import pytest

from conftest import BEACONS, SIDE, TRUTH_COLUMNS
from helpers import fd_riemannian_gradient_check, make_quartic_cost  # noqa: F401
from triloc.errors import SingularGeometry
from triloc.manifold import random_point
from triloc.objective import (
    BeaconSet,
    MeasurementSet,
    SmoothCost,
    localization_cost,
    projection_cost,
    true_ranges,
)


@pytest.fixture
def beacons():
    return BeaconSet(BEACONS.copy())


@pytest.fixture
def exact_measurements(beacons):
    return MeasurementSet.from_ranges(beacons, true_ranges(beacons, TRUTH_COLUMNS))


def fd_gradient(cost: SmoothCost, x, h=1e-6):
    g = np.zeros((3, 3))
    for k in range(9):
        e = np.zeros(9)
        e[k] = 1.0
        e = e.reshape(3, 3)
        g.flat[k] = (cost.value(x + h * e) - cost.value(x - h * e)) / (2 * h)
    return g


def fd_hessian_apply(cost: SmoothCost, x, v, h=1e-6):
    return (
        cost.euclidean_gradient(x + h * v) - cost.euclidean_gradient(x - h * v)
    ) / (2 * h)


def test_beacons_reject_coplanar():
    coplanar = np.array([[0, 0, 1], [4, 0, 1], [0, 4, 1], [4, 4, 1]], dtype=float)
    with pytest.raises(SingularGeometry):
        BeaconSet(coplanar)


def test_measurements_reject_nonpositive(beacons):
    r = true_ranges(beacons, TRUTH_COLUMNS)
    r[0, 0] = 0.0
    with pytest.raises(ValueError):
        MeasurementSet.from_ranges(beacons, r)


def test_linearized_data_definition(beacons):
    r = true_ranges(beacons, TRUTH_COLUMNS)
    m = MeasurementSet.from_ranges(beacons, r)
    expected = 0.5 * (np.sum(BEACONS**2, axis=1)[None, :] - r**2)
    assert np.array_equal(m.y, expected)


def test_localization_cost_zero_at_truth(beacons, exact_measurements):
    cost = localization_cost(beacons, exact_measurements)
    assert cost.value(TRUTH_COLUMNS) <= 1e-18
    g = cost.euclidean_gradient(TRUTH_COLUMNS)
    assert np.linalg.norm(g) <= 1e-9


def test_localization_cost_positive_off_truth(beacons, exact_measurements, rng):
    cost = localization_cost(beacons, exact_measurements)
    for _ in range(10):
        x = TRUTH_COLUMNS + 0.05 * rng.standard_normal((3, 3))
        assert cost.value(x) > 0


def test_localization_gradient_matches_fd(beacons, exact_measurements, rng):
    cost = localization_cost(beacons, exact_measurements)
    for _ in range(20):
        x = TRUTH_COLUMNS + 0.3 * rng.standard_normal((3, 3))
        g = cost.euclidean_gradient(x)
        fd = fd_gradient(cost, x)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(fd), 1.0)


def test_localization_hessian_matches_fd(beacons, exact_measurements, rng):
    cost = localization_cost(beacons, exact_measurements)
    for _ in range(20):
        x = TRUTH_COLUMNS + 0.3 * rng.standard_normal((3, 3))
        v = rng.standard_normal((3, 3))
        hv = cost.euclidean_hessian_apply(x, v)
        fd = fd_hessian_apply(cost, x, v)
        assert np.linalg.norm(hv - fd) <= 1e-6 * max(np.linalg.norm(fd), 1.0)


def test_localization_hessian_symmetric(beacons, exact_measurements, rng):
    cost = localization_cost(beacons, exact_measurements)
    x = TRUTH_COLUMNS + 0.2 * rng.standard_normal((3, 3))
    v = rng.standard_normal((3, 3))
    w = rng.standard_normal((3, 3))
    lhs = float(np.tensordot(cost.euclidean_hessian_apply(x, v), w))
    rhs = float(np.tensordot(v, cost.euclidean_hessian_apply(x, w)))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_localization_invariant_under_beacon_permutation(beacons, rng):
    r = true_ranges(beacons, TRUTH_COLUMNS) + 0.001 * rng.standard_normal((3, 4))
    perm = [2, 0, 3, 1]
    b2 = BeaconSet(BEACONS[perm].copy())
    m1 = MeasurementSet.from_ranges(beacons, r)
    m2 = MeasurementSet.from_ranges(b2, r[:, perm])
    c1 = localization_cost(beacons, m1)
    c2 = localization_cost(b2, m2)
    x = TRUTH_COLUMNS + 0.1 * rng.standard_normal((3, 3))
    assert c1.value(x) == pytest.approx(c2.value(x), rel=1e-12)


def test_projection_cost_basics(rng):
    p = random_point(SIDE, rng)
    cost = projection_cost(p.x)
    assert cost.value(p.x) == 0.0
    x = p.x + rng.standard_normal((3, 3))
    assert cost.value(x) == pytest.approx(np.sum((x - p.x) ** 2), rel=1e-14)
    assert np.allclose(cost.euclidean_gradient(x), 2 * (x - p.x))
    v = rng.standard_normal((3, 3))
    assert np.array_equal(cost.euclidean_hessian_apply(x, v), 2 * v)


def test_projection_gradient_matches_fd(rng):
    t = rng.standard_normal((3, 3))
    cost = projection_cost(t)
    x = rng.standard_normal((3, 3))
    fd = fd_gradient(cost, x)
    assert np.linalg.norm(cost.euclidean_gradient(x) - fd) <= 1e-7

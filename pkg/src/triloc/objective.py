"""Least-squares objectives driving the manifold solvers.

The range equations ||x - b_j|| = r_j are linearized by squaring:
b_j' x - ||x||^2 / 2 = (||b_j||^2 - r_j^2) / 2 =: y_j.  Stacking the four
beacons gives the residual A x - ||x||^2/2 * 1 - y per transmitter, and
the localization cost sums the squared residual norms of the three
transmitters.  All costs expose plain-ndarray callables (value, Euclidean
gradient, Euclidean Hessian application) so the manifold layer can wrap
them without ceremony.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SingularGeometry

_COND_LIMIT = 1e8


@dataclass(frozen=True)
class BeaconSet:
    """Four anchor receivers at known positions (rows of a 4x3 array)."""

    positions: np.ndarray

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (4, 3) or not np.all(np.isfinite(pos)):
            raise SingularGeometry("beacon positions must be a finite 4x3 array")
        object.__setattr__(self, "positions", pos)
        lifted = np.hstack([pos, np.ones((4, 1))])
        if np.linalg.cond(lifted) >= _COND_LIMIT:
            raise SingularGeometry(
                "beacons are coplanar or nearly so; positions are not identifiable"
            )

    @property
    def a_matrix(self) -> np.ndarray:
        """The 4x3 matrix whose rows are the beacon positions."""
        return self.positions

    @property
    def squared_norms(self) -> np.ndarray:
        return np.sum(self.positions**2, axis=1)


@dataclass(frozen=True)
class MeasurementSet:
    """Measured ranges (3 transmitters x 4 beacons) and the linearized data y."""

    ranges: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.ranges, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if r.shape != (3, 4) or y.shape != (3, 4):
            raise ValueError("ranges and y must be 3x4 arrays")
        if not np.all(np.isfinite(r)) or not np.all(r > 0):
            raise ValueError("all ranges must be finite and positive")
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_ranges(cls, beacons: BeaconSet, ranges: np.ndarray) -> "MeasurementSet":
        ranges = np.asarray(ranges, dtype=float)
        y = 0.5 * (beacons.squared_norms[None, :] - ranges**2)
        return cls(ranges, y)


def true_ranges(beacons: BeaconSet, x: np.ndarray) -> np.ndarray:
    """Exact transmitter-beacon distances for a 3x3 configuration (columns)."""
    diff = x.T[:, None, :] - beacons.positions[None, :, :]  # 3 x 4 x 3
    return np.linalg.norm(diff, axis=2)


@dataclass(frozen=True)
class SmoothCost:
    """A twice-differentiable cost on 3x3 configurations.

    Attributes:
        value: X -> float
        euclidean_gradient: X -> 3x3
        euclidean_hessian_apply: (X, V) -> 3x3, the Hessian at X applied to V
    """

    value: Callable[[np.ndarray], float]
    euclidean_gradient: Callable[[np.ndarray], np.ndarray]
    euclidean_hessian_apply: Callable[[np.ndarray, np.ndarray], np.ndarray]


def localization_cost(beacons: BeaconSet, meas: MeasurementSet) -> SmoothCost:
    """Sum of squared linearized range residuals over the three transmitters.

    With residual matrix R(X) = A X - (1/2)||x_i||^2 row-replicated - Y',
    the value is ||R||_F^2, the gradient column is
    2 (A' R_i - x_i (1' R_i)) and the Hessian application follows by
    differentiating the gradient (note 1'1 = 4).
    """
    a = beacons.a_matrix
    ata = a.T @ a
    at_ones = a.T @ np.ones(4)
    yt = meas.y.T  # 4 x 3, column i belongs to transmitter i

    def _residual(x: np.ndarray) -> np.ndarray:
        return a @ x - 0.5 * np.sum(x**2, axis=0)[None, :] - yt

    def value(x: np.ndarray) -> float:
        r = _residual(x)
        return float(np.tensordot(r, r))

    def euclidean_gradient(x: np.ndarray) -> np.ndarray:
        r = _residual(x)
        return 2.0 * (a.T @ r - x * np.sum(r, axis=0)[None, :])

    def euclidean_hessian_apply(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        r = _residual(x)
        xv = np.sum(x * v, axis=0)  # per-column <x_i, v_i>
        dr = a @ v - xv[None, :]
        return 2.0 * (
            a.T @ dr
            - v * np.sum(r, axis=0)[None, :]
            - x * np.sum(dr, axis=0)[None, :]
        )

    return SmoothCost(value, euclidean_gradient, euclidean_hessian_apply)


def projection_cost(target: np.ndarray) -> SmoothCost:
    """Squared Frobenius distance to a fixed 3x3 target configuration."""
    t = np.asarray(target, dtype=float).copy()

    def value(x: np.ndarray) -> float:
        d = x - t
        return float(np.tensordot(d, d))

    def euclidean_gradient(x: np.ndarray) -> np.ndarray:
        return 2.0 * (x - t)

    def euclidean_hessian_apply(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return 2.0 * v

    return SmoothCost(value, euclidean_gradient, euclidean_hessian_apply)

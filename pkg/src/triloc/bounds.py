"""Fisher information and Cramer-Rao bounds for the triangle localization.

The unconstrained FIM is block diagonal over the three transmitters and
has closed form under the Zadoff-Chu phase model.  The constrained bound
restricts the FIM to the null space of the squared-side-length constraint
Jacobian through an orthonormal basis Psi: CCRB = Psi (Psi' J Psi)^-1 Psi'.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateGeometry,
    RankDeficient,
    SingularFIM,
    SingularProjectedFIM,
)
from .manifold import TrianglePoint
from .objective import BeaconSet
from .signal import SignalParams

_COND_LIMIT = 1e12


def _as_columns(x) -> np.ndarray:
    if isinstance(x, TrianglePoint):
        return x.x
    return np.asarray(x, dtype=float)


def link_weight(rho: float, psi: float, sigma: float, R: int, sig: SignalParams) -> float:
    """Scalar FIM weight of one link at distance rho.

    The weight multiplies the outer product (x_i - b_j)(x_i - b_j)^T and
    comes from summing the squared phase-slope of the Zadoff-Chu sequence
    over its K symbols; the bracket has no real roots in 1/rho, so the
    weight is positive at every distance.
    """
    K = sig.K
    cts = sig.c * sig.ts
    front = 2.0 * (psi * np.pi * R / (sigma * K * cts)) ** 2
    if K % 2:
        bracket = (
            4.0 * K / cts**2
            - 4.0 * K**2 / (cts * rho)
            + K * (2 * K - 1) * (2 * K + 1) / (3.0 * rho**2)
        )
    else:
        front *= 4.0
        bracket = (
            K / cts**2
            - K * (K - 1) / (cts * rho)
            + K * (K - 1) * (2 * K - 1) / (6.0 * rho**2)
        )
    return front * bracket


def fim_blocks(
    point: TrianglePoint | np.ndarray, beacons: BeaconSet, sig: SignalParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-transmitter 3x3 Fisher information blocks.

    Raises:
        DegenerateGeometry: if a transmitter sits on a beacon.
    """
    x = _as_columns(point)
    blocks = []
    for i in range(3):
        block = np.zeros((3, 3))
        for j in range(4):
            diff = x[:, i] - beacons.positions[j]
            rho = float(np.linalg.norm(diff))
            if rho <= 1e-9:
                raise DegenerateGeometry(
                    f"transmitter {i} coincides with beacon {j}"
                )
            w = link_weight(rho, sig.psi[i, j], sig.sigma[i, j], sig.roots[i], sig)
            block += w * np.outer(diff, diff)
        blocks.append(block)
    return tuple(blocks)


def assemble_fim(blocks) -> np.ndarray:
    """Stack three 3x3 blocks into the block-diagonal 9x9 FIM."""
    j = np.zeros((9, 9))
    for i, block in enumerate(blocks):
        j[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = block
    return j


def crb(j: np.ndarray) -> np.ndarray:
    """Unconstrained bound J^-1.

    Raises:
        SingularFIM: if J is too ill-conditioned to invert reliably.
    """
    j = np.asarray(j, dtype=float)
    if np.linalg.cond(j) >= _COND_LIMIT:
        raise SingularFIM("Fisher information matrix is numerically singular")
    inv = scipy.linalg.solve(j, np.eye(j.shape[0]), assume_a="sym")
    return 0.5 * (inv + inv.T)


def triangle_constraints(point: TrianglePoint | np.ndarray, d: float) -> np.ndarray:
    """Squared-side-length residuals [||x1-x2||^2 - d^2, ...] (cyclic)."""
    x = _as_columns(point)
    a = x[:, 0] - x[:, 1]
    b = x[:, 1] - x[:, 2]
    c = x[:, 2] - x[:, 0]
    return np.array([a @ a - d * d, b @ b - d * d, c @ c - d * d])


def constraint_jacobian(point: TrianglePoint | np.ndarray) -> np.ndarray:
    """3x9 Jacobian of the squared-side constraints wrt theta = [x1; x2; x3]."""
    x = _as_columns(point)
    a = x[:, 0] - x[:, 1]
    b = x[:, 1] - x[:, 2]
    c = x[:, 2] - x[:, 0]
    zero = np.zeros(3)
    return 2.0 * np.array(
        [
            np.concatenate([a, -a, zero]),
            np.concatenate([zero, b, -b]),
            np.concatenate([-c, zero, c]),
        ]
    )


def nullspace_basis(q: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of the constraint Jacobian.

    Raises:
        RankDeficient: if the Jacobian loses row rank (degenerate triangle).
    """
    q = np.asarray(q, dtype=float)
    if np.linalg.matrix_rank(q) < q.shape[0]:
        raise RankDeficient("constraint Jacobian is rank deficient")
    return scipy.linalg.null_space(q)


def ccrb(j: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Constrained bound Psi (Psi' J Psi)^-1 Psi'.

    Raises:
        SingularProjectedFIM: if the projected FIM cannot be inverted.
    """
    projected = psi.T @ j @ psi
    if np.linalg.cond(projected) >= _COND_LIMIT:
        raise SingularProjectedFIM(
            "projected Fisher information matrix is numerically singular"
        )
    inv = scipy.linalg.solve(projected, np.eye(projected.shape[0]), assume_a="sym")
    out = psi @ inv @ psi.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class FisherBundle:
    """All bound-related matrices for one geometry and signal setting."""

    theta: np.ndarray
    j: np.ndarray
    crb: np.ndarray
    q: np.ndarray
    psi: np.ndarray
    ccrb: np.ndarray


def fisher_bundle(
    point: TrianglePoint, beacons: BeaconSet, sig: SignalParams
) -> FisherBundle:
    """Assemble FIM, CRB, constraint Jacobian, null basis and CCRB."""
    x = _as_columns(point)
    j = assemble_fim(fim_blocks(point, beacons, sig))
    q = constraint_jacobian(point)
    psi = nullspace_basis(q)
    return FisherBundle(
        theta=x.ravel(order="F"),
        j=j,
        crb=crb(j),
        q=q,
        psi=psi,
        ccrb=ccrb(j, psi),
    )

"""Fisher information, CRB, constraint null space, and constrained CRB."""

import numpy as np
import pytest

from conftest import BEACONS, SIDE, TRUTH_COLUMNS
from triloc.bounds import (
    assemble_fim,
    ccrb,
    constraint_jacobian,
    crb,
    fim_blocks,
    fisher_bundle,
    nullspace_basis,
    triangle_constraints,
)
from triloc.errors import (
    DegenerateGeometry,
    RankDeficient,
    SingularFIM,
    SingularProjectedFIM,
)
from triloc.manifold import TrianglePoint, random_point
from triloc.objective import BeaconSet
from triloc.signal import SignalParams


def _beacons():
    return BeaconSet(BEACONS.copy())


def _phase_slope_weight(rho, psi, sigma, R, sig):
    """Link weight from the raw per-symbol sum, before any sum identities.

    The score of one link wrt distance is a sum over symbols of the
    continuous phase slope; its variance gives the weight of the
    normalized outer product, so dividing by rho^2 yields the weight of
    the full difference outer product.
    """
    cts = sig.c * sig.ts
    u = rho / cts
    t = np.arange(sig.K) - u
    if sig.K % 2:
        dphi = np.pi * R * (2 * t + 1) / sig.K
    else:
        dphi = 2 * np.pi * R * t / sig.K
    return (2.0 * psi**2 / sigma**2) * np.sum((dphi / cts) ** 2) / rho**2


class TestFimBlocks:
    def test_blocks_symmetric_psd_and_block_diagonal(self):
        sig = SignalParams().with_snr(10.0)
        blocks = fim_blocks(TRUTH_COLUMNS, _beacons(), sig)
        for block in blocks:
            assert np.array_equal(block, block.T)
            assert np.all(np.linalg.eigvalsh(block) > 0)
        j = assemble_fim(blocks)
        mask = np.kron(np.eye(3, dtype=bool), np.ones((3, 3), dtype=bool))
        assert np.all(j[~mask] == 0.0)

    @pytest.mark.parametrize("K,roots", [(151, (1, 2, 3)), (16, (1, 3, 5))])
    def test_weights_match_raw_symbol_sum(self, K, roots):
        # the closed-form bracket is an exercise in sum identities; the
        # unsimplified per-symbol sum is the independent reference
        sig = SignalParams(K=K, roots=roots).with_snr(10.0)
        beacons = _beacons()
        blocks = fim_blocks(TRUTH_COLUMNS, beacons, sig)
        for i in range(3):
            expected = np.zeros((3, 3))
            for j in range(4):
                diff = TRUTH_COLUMNS[:, i] - beacons.positions[j]
                rho = np.linalg.norm(diff)
                w = _phase_slope_weight(
                    rho, sig.psi[i, j], sig.sigma[i, j], sig.roots[i], sig
                )
                expected += w * np.outer(diff, diff)
            assert np.allclose(blocks[i], expected, rtol=1e-10)

    def test_monte_carlo_score_covariance(self):
        # short sequence and a differentiable fractional-delay surrogate:
        # the sample covariance of the score must reproduce the closed form
        sig = SignalParams(K=15, roots=(1, 2, 4)).with_snr(10.0)
        beacons = _beacons()
        j = assemble_fim(fim_blocks(TRUTH_COLUMNS, beacons, sig))
        rng = np.random.default_rng(2024)
        cts = sig.c * sig.ts
        k = np.arange(sig.K)
        ndraws = 10000
        scores = np.zeros((ndraws, 9))
        for i in range(3):
            R = sig.roots[i]
            for b in range(4):
                diff = TRUTH_COLUMNS[:, i] - beacons.positions[b]
                rho = np.linalg.norm(diff)
                unit = diff / rho
                psi_ij = sig.psi[i, b]
                sigma_ij = sig.sigma[i, b]
                t = k - rho / cts
                s = np.exp(1j * np.pi * R * t * (t + 1) / sig.K)
                dphi = np.pi * R * (2 * t + 1) / sig.K
                ds_drho = -(1.0 / cts) * 1j * dphi * s
                noise = (sigma_ij / np.sqrt(2.0)) * (
                    rng.standard_normal((ndraws, sig.K))
                    + 1j * rng.standard_normal((ndraws, sig.K))
                )
                dl_drho = (2.0 * psi_ij / sigma_ij**2) * np.real(
                    np.conj(noise) @ ds_drho
                )
                scores[:, 3 * i : 3 * i + 3] += dl_drho[:, None] * unit[None, :]
        empirical = scores.T @ scores / ndraws
        assert abs(np.trace(empirical) - np.trace(j)) <= 0.1 * np.trace(j)

    def test_doubling_psi_quadruples_blocks(self):
        sig = SignalParams(sigma=np.full((3, 4), 0.3))
        sig2 = SignalParams(psi=2.0 * sig.psi, sigma=sig.sigma)
        blocks = fim_blocks(TRUTH_COLUMNS, _beacons(), sig)
        blocks2 = fim_blocks(TRUTH_COLUMNS, _beacons(), sig2)
        for b, b2 in zip(blocks, blocks2):
            assert np.allclose(b2, 4.0 * b, rtol=1e-12)

    def test_transmitter_on_beacon_rejected(self):
        x = TRUTH_COLUMNS.copy()
        shift = x[:, 0] - BEACONS[0]
        x = x - shift[:, None]  # rigid move putting x1 exactly on beacon 1
        with pytest.raises(DegenerateGeometry):
            fim_blocks(x, _beacons(), SignalParams().with_snr(10.0))


class TestCrb:
    def test_identity(self):
        assert np.allclose(crb(np.eye(9)), np.eye(9), atol=1e-14)

    def test_block_diagonal_inverse(self, rng):
        blocks = []
        for _ in range(3):
            m = rng.standard_normal((3, 3))
            blocks.append(m @ m.T + 3.0 * np.eye(3))
        j = assemble_fim(blocks)
        inv = crb(j)
        for i, block in enumerate(blocks):
            s = np.s_[3 * i : 3 * i + 3]
            assert np.allclose(inv[s, s], np.linalg.inv(block), rtol=1e-10)

    def test_reference_geometry_psd(self):
        sig = SignalParams().with_snr(10.0)
        j = assemble_fim(fim_blocks(TRUTH_COLUMNS, _beacons(), sig))
        bound = crb(j)
        assert np.all(np.diag(bound) > 0)
        assert np.min(np.linalg.eigvalsh(bound)) > 0

    def test_singular_fim_rejected(self):
        with pytest.raises(SingularFIM):
            crb(np.diag([1.0] * 8 + [1e-13]))


class TestConstraintJacobian:
    def test_residuals_vanish_on_manifold(self, truth_point):
        q = triangle_constraints(truth_point, SIDE)
        assert np.all(np.abs(q) <= 1e-6)

    def test_translations_annihilated(self, truth_point, rng):
        q = constraint_jacobian(truth_point)
        for _ in range(5):
            u = rng.standard_normal(3)
            v = np.concatenate([u, u, u])
            assert np.allclose(q @ v, 0.0, atol=1e-12)

    def test_matches_finite_differences(self, truth_point):
        q = constraint_jacobian(truth_point)
        theta = truth_point.x.ravel(order="F")
        h = 1e-6
        fd = np.empty((3, 9))
        for m in range(9):
            step = np.zeros(9)
            step[m] = h
            xp = (theta + step).reshape(3, 3, order="F")
            xm = (theta - step).reshape(3, 3, order="F")
            fd[:, m] = (
                triangle_constraints(xp, SIDE) - triangle_constraints(xm, SIDE)
            ) / (2 * h)
        assert np.linalg.norm(fd - q) <= 1e-7 * np.linalg.norm(q)


def _closed_form_null(x):
    """Sparse algebraic null-matrix candidate assembled from edge components.

    Annihilates the constraint Jacobian but is not orthonormal and has
    wildly uneven column scales, which is why the shipped basis is
    computed numerically instead.
    """
    a1, a2, a3 = x[:, 0] - x[:, 1]
    b1, b2, b3 = x[:, 1] - x[:, 2]
    c1, c2, c3 = x[:, 2] - x[:, 0]
    m = np.zeros((9, 6))
    m[0] = [
        a3 * c2 - a2 * c3,
        c2 * (a1 * b2 - a2 * b1),
        c2 * (a1 * b3 - a3 * b1),
        1,
        c2 * (a2 * b1 - a1 * b2),
        a2 * b1 * c3 - a1 * b3 * c2,
    ]
    m[1] = [
        a1 * c3 - a3 * c1,
        c1 * (a2 * b1 - a1 * b2),
        c1 * (a3 * b1 - a1 * b3),
        0,
        a1 * (b2 * c1 - b1 * c2),
        a1 * (b3 * c1 - b1 * c3),
    ]
    m[2, 0] = a2 * c1 - a1 * c2
    m[3] = [
        0,
        b2 * (a1 * c2 - a2 * c1),
        b3 * (a1 * c2 - a2 * c1),
        1,
        b2 * (a2 * c1 - a1 * c2),
        b3 * (a2 * c1 - a1 * c2),
    ]
    m[4, 1] = b1 * (a2 * c1 - a1 * c2)
    m[5, 2] = b1 * (a2 * c1 - a1 * c2)
    m[6, 3] = 1
    m[7, 4] = b1 * (a2 * c1 - a1 * c2)
    m[8, 5] = b1 * (a2 * c1 - a1 * c2)
    return m


class TestNullspaceBasis:
    def test_postconditions(self, rng):
        for _ in range(10):
            point = random_point(SIDE, rng)
            q = constraint_jacobian(point)
            psi = nullspace_basis(q)
            assert psi.shape == (9, 6)
            assert np.linalg.norm(q @ psi) <= 1e-12
            assert np.linalg.norm(psi.T @ psi - np.eye(6)) <= 1e-12

    def test_contains_translations(self, truth_point):
        psi = nullspace_basis(constraint_jacobian(truth_point))
        for k in range(3):
            v = np.zeros(9)
            v[k] = v[k + 3] = v[k + 6] = 1.0 / np.sqrt(3.0)
            assert np.linalg.norm(v - psi @ (psi.T @ v)) <= 1e-12

    def test_contains_infinitesimal_rotations(self, truth_point, rng):
        psi = nullspace_basis(constraint_jacobian(truth_point))
        for _ in range(5):
            omega = rng.standard_normal(3)
            v = np.concatenate(
                [np.cross(omega, truth_point.x[:, i]) for i in range(3)]
            )
            v = v / np.linalg.norm(v)
            assert np.linalg.norm(v - psi @ (psi.T @ v)) <= 1e-12

    def test_rank_deficient_rejected(self):
        with pytest.raises(RankDeficient):
            nullspace_basis(np.zeros((3, 9)))

    def test_closed_form_candidate_annihilates_but_not_orthonormal(self, rng):
        for _ in range(10):
            point = random_point(SIDE, rng)
            q = constraint_jacobian(point)
            cand = _closed_form_null(point.x)
            for col in range(6):
                v = cand[:, col]
                norm = np.linalg.norm(v)
                assert norm > 0
                assert np.linalg.norm(q @ v) <= 1e-10 * np.linalg.norm(q) * norm
            gram = cand.T @ cand
            assert np.linalg.norm(gram - np.eye(6)) > 0.1


class TestCcrb:
    def test_identity_fim_gives_projector(self, truth_point):
        psi = nullspace_basis(constraint_jacobian(truth_point))
        assert np.allclose(ccrb(np.eye(9), psi), psi @ psi.T, atol=1e-13)

    def test_tighter_than_crb_across_snr(self, truth_point):
        beacons = _beacons()
        for snr in [0.0, 5.0, 10.0, 15.0, 20.0]:
            sig = SignalParams().with_snr(snr)
            bundle = fisher_bundle(truth_point, beacons, sig)
            assert np.trace(bundle.ccrb) < np.trace(bundle.crb)

    def test_crb_minus_ccrb_psd(self, truth_point):
        sig = SignalParams().with_snr(10.0)
        bundle = fisher_bundle(truth_point, _beacons(), sig)
        gap = bundle.crb - bundle.ccrb
        assert np.min(np.linalg.eigvalsh(gap)) >= -1e-10 * np.trace(bundle.crb)

    def test_diag_monotone_in_snr(self, truth_point):
        beacons = _beacons()
        prev = None
        for snr in [0.0, 5.0, 10.0, 15.0, 20.0]:
            sig = SignalParams().with_snr(snr)
            bundle = fisher_bundle(truth_point, beacons, sig)
            diag = np.sqrt(np.diag(bundle.ccrb))
            if prev is not None:
                assert np.all(diag < prev)
            prev = diag

    def test_trace_invariant_under_rigid_translation(self, truth_point):
        sig = SignalParams().with_snr(10.0)
        base = fisher_bundle(truth_point, _beacons(), sig)
        shift = np.array([0.3, -0.2, 0.15])
        moved_point = TrianglePoint(truth_point.x + shift[:, None], SIDE)
        moved_beacons = BeaconSet(BEACONS + shift[None, :])
        moved = fisher_bundle(moved_point, moved_beacons, sig)
        rel = abs(np.trace(moved.ccrb) - np.trace(base.ccrb)) / np.trace(base.ccrb)
        assert rel <= 1e-9

    def test_projected_singularity_rejected(self, truth_point):
        q = constraint_jacobian(truth_point)
        psi = nullspace_basis(q)
        # information confined to the constraint row space leaves the
        # projected FIM with nothing to invert
        with pytest.raises(SingularProjectedFIM):
            ccrb(q.T @ q, psi)


class TestFisherBundle:
    def test_fields_consistent(self, truth_point):
        sig = SignalParams().with_snr(10.0)
        bundle = fisher_bundle(truth_point, _beacons(), sig)
        assert bundle.theta.shape == (9,)
        assert np.array_equal(
            bundle.theta, truth_point.x.ravel(order="F")
        )
        assert bundle.j.shape == (9, 9)
        assert np.array_equal(bundle.j, bundle.j.T)
        assert np.linalg.norm(bundle.q @ bundle.psi) <= 1e-12
        assert np.allclose(bundle.crb @ bundle.j, np.eye(9), atol=1e-9)
        s = np.linalg.svd(bundle.ccrb, compute_uv=False)
        assert s[6] <= 1e-12 * s[0]  # rank 6: projector through a 9x6 basis

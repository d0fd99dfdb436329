import numpy as np
import pytest

from gaplab.interaction import Interaction, Term, local_hamiltonian, \
    random_interaction
from gaplab.lattice import Interval, ball
from gaplab.operator_algebra import LocalOperator, operator_norm
from gaplab.spectra import (FrustrationError, RefinementError,
                            cluster_projector, diagonalize, gap_curve,
                            ground_projector, higher_gap_track, kernel_basis,
                            kernel_basis_dense, resolution_family,
                            sigma_projection, sp0_diameter_scan)

Z = np.array([[1, 0], [0, -1]], dtype=complex)


def ising(lam):
    terms = [Term(LocalOperator((np.eye(4) - np.kron(Z, Z)) / 2.0,
                                Interval(x, x + 1), lam))
             for x in range(lam.a, lam.b)]
    return Interaction(terms)


def test_diagonalize_residual_certificate():
    h = np.diag([0.0, 1.0, 3.0])
    evals, evecs = diagonalize(h)
    np.testing.assert_allclose(evals, [0, 1, 3])
    np.testing.assert_allclose(evecs @ evecs.conj().T, np.eye(3), atol=1e-12)


def test_ground_projector_rank():
    lam = Interval(0, 3)
    p = ground_projector(local_hamiltonian(ising(lam), lam))
    assert np.trace(p).real == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)


def test_ground_projector_needs_kernel():
    with pytest.raises(FrustrationError):
        ground_projector(np.diag([1.0, 2.0]))


def test_kernel_basis_sparse_path():
    lam = Interval(0, 11)
    h = local_hamiltonian(ising(lam), lam, sparse=True)
    basis = kernel_basis(h, max_dense=64, expect=2)
    assert basis.shape == (4096, 2)
    # columns orthonormal and annihilated by H
    np.testing.assert_allclose(basis.conj().T @ basis, np.eye(2), atol=1e-9)
    assert operator_norm(h @ basis) <= 1e-8


def test_kernel_basis_dense_small_sparse():
    lam = Interval(0, 3)
    h = local_hamiltonian(ising(lam), lam, sparse=True)
    basis = kernel_basis(h, max_dense=64)
    assert basis.shape[1] == 2


# --- gap curves -------------------------------------------------------------


def test_gap_curve_two_level_oracle():
    """H = diag(0, 1), psi = diag(1, -1): gap(eps) = 1 - 2 eps exactly."""
    h0 = np.diag([0.0, 1.0])
    psi = np.diag([1.0, -1.0])
    grid = [0.0, 0.1, 0.2]
    splits = gap_curve(h0, psi, grid)
    for sp in splits:
        assert sp.gamma == pytest.approx(1.0 - 2.0 * sp.eps, abs=1e-12)
        assert sp.sp0.size == 1


def test_gap_curve_tracks_through_shift():
    # uniform shift never closes the tracked gap
    h0 = np.diag([0.0, 0.0, 2.0])
    psi = np.eye(3)
    splits = gap_curve(h0, psi, np.linspace(0, 1, 5))
    for sp in splits:
        assert sp.gamma == pytest.approx(2.0, abs=1e-12)
        assert sp.sp0_diameter == pytest.approx(0.0, abs=1e-12)


def test_gap_curve_refinement_error_on_closing():
    # the perturbation closes the gap inside the sweep: tracking must refuse
    h0 = np.diag([0.0, 1.0])
    psi = np.diag([1.0, -1.0])
    with pytest.raises(RefinementError):
        gap_curve(h0, psi, [0.0, 0.5, 1.0], max_depth=3)


def test_gap_curve_respects_cluster_dim():
    h0 = np.diag([0.0, 0.001, 1.0])
    psi = np.zeros((3, 3))
    splits = gap_curve(h0, psi, [0.0, 0.1], cluster_dim=2)
    assert splits[0].sp0.size == 2
    assert splits[0].gamma == pytest.approx(0.999, abs=1e-12)


def test_cluster_projector():
    h = np.diag([0.0, 0.1, 5.0])
    p = cluster_projector(h, 2)
    np.testing.assert_allclose(p, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    with pytest.raises(RefinementError):
        cluster_projector(np.diag([0.0, 0.0, 1.0]), 1)  # degenerate boundary


# --- resolution families ------------------------------------------------------


def test_resolution_family_identities():
    lam = Interval(0, 6)
    eta = ising(lam)
    fam = resolution_family(eta, lam, 3)
    assert fam.r_x == 3
    dim = fam.P.shape[0]
    total = sum(fam.E)
    np.testing.assert_allclose(total, np.eye(dim), atol=1e-10)
    # partial sums telescope to 1 - P_{b(x,n)}
    partial = np.zeros_like(fam.P)
    for n, e in enumerate(fam.E[:-2], start=1):
        partial = partial + e
        np.testing.assert_allclose(partial, np.eye(dim) - fam.locals[n - 1],
                                   atol=1e-10)
        # annihilation: P_{b(x,n)} E_n = 0
        assert operator_norm(fam.locals[n - 1] @ e) <= 1e-10
    # nesting makes every E_n a projector here
    for e in fam.E:
        np.testing.assert_allclose(e @ e, e, atol=1e-9)


def test_resolution_family_needs_interior_site():
    lam = Interval(0, 6)
    eta = ising(lam)
    with pytest.raises(ValueError):
        resolution_family(eta, lam, 0)
    with pytest.raises(ValueError):
        resolution_family(eta, lam, 6)


def test_sigma_projection_partition_of_identity():
    lam = Interval(0, 8)
    eta = ising(lam)
    members = []
    for x in (2, 6):
        b = ball(lam, x, 1)
        p = ground_projector(local_hamiltonian(eta.restricted(b), b))
        nl, nr = b.a - lam.a, lam.b - b.b
        p_full = np.kron(np.eye(2 ** nl), np.kron(p, np.eye(2 ** nr)))
        members.append((x, b, p_full))
    dim = 2 ** len(lam)
    total = np.zeros((dim, dim), dtype=complex)
    for bits in np.ndindex(2, 2):
        sig = {2: bits[0], 6: bits[1]}
        total = total + sigma_projection(members, sig)
    np.testing.assert_allclose(total, np.eye(dim), atol=1e-10)


def test_sigma_projection_rejects_overlap():
    lam = Interval(0, 4)
    eta = ising(lam)
    members = []
    for x in (1, 2):
        b = ball(lam, x, 1)
        p = ground_projector(local_hamiltonian(eta.restricted(b), b))
        nl, nr = b.a - lam.a, lam.b - b.b
        members.append((x, b, np.kron(np.eye(2 ** nl),
                                      np.kron(p, np.eye(2 ** nr)))))
    with pytest.raises(ValueError):
        sigma_projection(members, {1: 0, 2: 0})


# --- higher windows and the diameter scan --------------------------------------


def test_higher_gap_track_analytic():
    h0 = np.diag([0.0, 1.0, 2.0, 3.0])
    psi = np.diag([0.0, 1.0, -1.0, 0.0])
    # window between 1 and 2: gamma(eps) = (2 - eps) - (1 + eps)
    rows = higher_gap_track(h0, psi, [0.0, 0.1, 0.2], nu=1.0, mu=2.0)
    for eps, g in rows:
        assert g == pytest.approx(1.0 - 2.0 * eps, abs=1e-12)


def test_higher_gap_track_window_must_be_populated():
    with pytest.raises(ValueError):
        higher_gap_track(np.diag([5.0, 6.0]), np.eye(2), [0.0], nu=1.0, mu=2.0)


def test_higher_gap_identity_perturbation_is_constant():
    h0 = np.diag([0.0, 0.5, 2.0, 2.5])
    rows = higher_gap_track(h0, np.eye(4), [0.0, 0.3, 0.7], nu=0.5, mu=2.0)
    for _, g in rows:
        assert g == pytest.approx(1.5, abs=1e-12)


def test_sp0_scan_trivial_cases():
    lam = Interval(0, 5)
    eta = ising(lam)
    pert = random_interaction(lam, seed=1, n_terms=4, max_diameter=1)
    # depth swallowing the volume: perturbation drops out entirely
    rows = sp0_diameter_scan(eta, pert, lam, 0.1, [6])
    assert rows[0]["sp0_diam"] == pytest.approx(0.0, abs=1e-12)
    # eps = 0: diameter pinned to exactly zero
    rows = sp0_diameter_scan(eta, pert, lam, 0.0, [1, 2])
    assert all(r["sp0_diam"] == 0.0 for r in rows)


def test_sp0_scan_reports_gamma():
    lam = Interval(0, 5)
    eta = ising(lam)
    pert = random_interaction(lam, seed=2, n_terms=4, max_diameter=1)
    rows = sp0_diameter_scan(eta, pert, lam, 0.05, [1])
    assert rows[0]["gamma"] > 0.5
    assert rows[0]["sp1_min"] >= rows[0]["sp0_max"]

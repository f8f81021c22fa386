import math

import numpy as np
import pytest

from transmonsim import solver as sv
from transmonsim.device import (ApproxKind, DeviceError, TWOPI, TransmonParams,
                                build_reference_hamiltonian, dense_hamiltonian,
                                dense_propagator, device_basis, diagonalize_transmon,
                                drive_scale, format_device, h0_energies, jacobi_eigh,
                                make_device, parse_device, resonator_basis_data,
                                transmon_basis_data, ResonatorParams)


class TestDiagonalizeTransmon:
    def test_reference_spectrum(self):
        e, _ = diagonalize_transmon(TransmonParams(0.222, 12.61), n_charge=101)
        assert e[1] == pytest.approx(4.498, abs=2e-3)
        assert e[2] - 2 * e[1] == pytest.approx(-0.252, abs=2e-3)

    def test_two_transmon_spectrum(self):
        e, _ = diagonalize_transmon(TransmonParams(0.301, 13.349))
        assert e[1] == pytest.approx(5.350, abs=2e-3)
        assert e[2] - 2 * e[1] == pytest.approx(-0.350, abs=2e-3)

    def test_vanishing_josephson_energy(self):
        # decoupled charge basis: eigenvalues 4 EC n^2, lowest 0 then doubly degenerate
        e, _ = diagonalize_transmon(TransmonParams(0.25, 1e-30))
        assert e[0] == pytest.approx(0.0, abs=1e-12)
        assert e[1] == pytest.approx(4 * 0.25, abs=1e-9)
        assert e[2] == pytest.approx(4 * 0.25, abs=1e-9)
        assert e[3] == pytest.approx(16 * 0.25, abs=1e-9)

    def test_truncation_convergence(self):
        p = TransmonParams(0.301, 13.349)
        e101, _ = diagonalize_transmon(p, n_charge=101)
        e121, _ = diagonalize_transmon(p, n_charge=121)
        assert np.abs(e101 - e121).max() < 1e-10

    def test_invalid_truncation(self):
        with pytest.raises(DeviceError):
            diagonalize_transmon(TransmonParams(0.2, 12.0), n_charge=100)
        with pytest.raises(DeviceError):
            diagonalize_transmon(TransmonParams(0.2, 12.0), n_charge=21, n_levels=30)

    def test_sign_convention_deterministic(self):
        _, c1 = diagonalize_transmon(TransmonParams(0.222, 12.61))
        _, c2 = diagonalize_transmon(TransmonParams(0.222, 12.61))
        assert np.array_equal(c1, c2)


class TestChargeElements:
    def test_parity_selection_rule(self):
        bd = transmon_basis_data(TransmonParams(0.222, 12.61))
        assert bd.charge_elems[0, 2] == 0.0
        assert bd.charge_elems[1, 3] == 0.0
        assert np.allclose(bd.charge_elems, bd.charge_elems.T)
        assert np.all(np.diag(bd.charge_elems) == 0.0)

    def test_harmonic_limit(self):
        bd = transmon_basis_data(TransmonParams(0.222, 12.61))
        ao = (12.61 / (32 * 0.222)) ** 0.25
        assert abs(bd.charge_elems[0, 1]) == pytest.approx(ao, rel=0.05)

    def test_far_offdiagonal_suppressed(self):
        bd = transmon_basis_data(TransmonParams(0.222, 12.61))
        ratio = abs(bd.charge_elems[0, 1]) / abs(bd.charge_elems[0, 3])
        assert 10 < ratio < 50

    def test_eigendecomposition_exact(self):
        bd = transmon_basis_data(TransmonParams(0.301, 12.292))
        recon = bd.vn @ np.diag(bd.lam_n) @ bd.vn.T
        assert np.abs(recon - bd.charge_elems).max() < 1e-12
        assert np.abs(bd.vn @ bd.vn.T - np.eye(4)).max() < 1e-12

    def test_energies_increasing(self):
        bd = transmon_basis_data(TransmonParams(0.222, 12.61))
        assert np.all(np.diff(bd.energies) > 0)
        assert bd.energies[0] == 0.0


class TestJacobi:
    def test_matches_lapack(self, rng):
        for _ in range(20):
            a = rng.normal(size=(4, 4))
            a = a + a.T
            w, v = jacobi_eigh(a)
            assert np.abs(v @ np.diag(w) @ v.T - a).max() < 1e-12
            assert np.abs(v @ v.T - np.eye(4)).max() < 1e-12
            assert np.allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-12)


class TestResonatorBasis:
    def test_ground_window(self):
        bd = resonator_basis_data(ResonatorParams(5.821, 0))
        assert np.allclose(np.diag(bd.field_elems, 1), [1.0, math.sqrt(2), math.sqrt(3)])

    def test_offset_window(self):
        bd = resonator_basis_data(ResonatorParams(5.821, 98))
        assert np.allclose(np.diag(bd.field_elems, 1),
                           [math.sqrt(99), math.sqrt(100), math.sqrt(101)])

    def test_traceless(self):
        bd = resonator_basis_data(ResonatorParams(4.0, 7))
        assert abs(bd.lam_a.sum()) < 1e-12


class TestH0:
    def test_ground_state_zero(self, kit_device):
        assert h0_energies(kit_device)[0] == 0.0

    def test_single_photon(self, kit_device):
        km = sv.pack_index([1], [0])
        assert h0_energies(kit_device)[km] == pytest.approx(TWOPI * 5.821, rel=1e-12)

    def test_no_interaction_shift(self, kit_device, kit_basis):
        km = sv.pack_index([1], [1])
        expect = TWOPI * (5.821 + kit_basis.transmons[0].energies[1])
        assert h0_energies(kit_device)[km] == pytest.approx(expect, rel=1e-12)

    def test_additivity(self):
        d1 = make_device([(0.222, 12.61)], [])
        d2 = make_device([], [(5.821, 0)])
        both = make_device([(0.222, 12.61)], [(5.821, 0)])
        e_t, e_r, e_b = h0_energies(d1), h0_energies(d2), h0_energies(both)
        for km in range(16):
            k, m = km >> 2, km & 3
            assert e_b[km] == pytest.approx(e_r[k] + e_t[m], rel=1e-13)


class TestDriveScale:
    def test_reference_value(self):
        assert drive_scale(TransmonParams(0.301, 13.349)) == pytest.approx(2.613, abs=1e-3)

    def test_small_ec_limit(self):
        assert drive_scale(TransmonParams(1e-8, 12.0)) < 1e-5

    def test_formula(self):
        expect = 8 * 0.222 * (12.61 / (32 * 0.222)) ** 0.25
        assert drive_scale(TransmonParams(0.222, 12.61)) == pytest.approx(expect, rel=1e-14)


class TestReferenceHamiltonians:
    def test_tla_dimension(self):
        h = build_reference_hamiltonian(ApproxKind.TLA, TransmonParams(0.222, 12.61),
                                        ResonatorParams(5.821, 0), 0.0349, cutoff=7)
        assert h.shape == (14, 14)

    def test_ao_full_diagonal(self):
        p = TransmonParams(0.222, 12.61)
        h = build_reference_hamiltonian(ApproxKind.AO_FULL, p, ResonatorParams(5.821, 0),
                                        0.0, cutoff=5)
        wbar = TWOPI * (math.sqrt(8 * 0.222 * 12.61) - 0.222)
        abar = -TWOPI * 0.222
        for m in range(5):
            assert h[m, m].real == pytest.approx(wbar * m + abar * m * (m - 1) / 2, rel=1e-12)

    def test_all_kinds_hermitian(self):
        p, r = TransmonParams(0.222, 12.61), ResonatorParams(5.821, 0)
        for kind in ApproxKind:
            h = build_reference_hamiltonian(kind, p, r, 0.0349, cutoff=6)
            assert np.abs(h - h.conj().T).max() < 1e-10

    def test_cutoff_validation(self):
        with pytest.raises(DeviceError):
            build_reference_hamiltonian(ApproxKind.FULL, TransmonParams(0.2, 12.0),
                                        ResonatorParams(5.0, 0), 0.03, cutoff=1)

    def test_full_matches_solver(self, kit_device):
        # cross-oracle: dense propagation of the 4-level FULL model vs the
        # product-formula solver, initial |k=2, m=1>, p21(t) over 100 ns
        h = build_reference_hamiltonian(ApproxKind.FULL, kit_device.transmons[0],
                                        kit_device.resonators[0], 0.0349, cutoff=4)
        psi = sv.StateVector.basis_state([2], [1])
        times = np.arange(1.0, 101.0)
        traj = sv.evolve(psi, kit_device, None, sv.SolverConfig(tau=1e-4, snapshot_times=tuple(times)))
        idx = 2 * 4 + 1
        vec0 = np.zeros(16, dtype=complex)
        vec0[idx] = 1.0
        for n, t in enumerate(times):
            p_dense = abs((dense_propagator(h, t) @ vec0)[idx]) ** 2
            p_solver = abs(traj.states[n][sv.pack_index([2], [1])]) ** 2
            assert p_dense == pytest.approx(p_solver, abs=1e-6)


class TestDensePropagator:
    def test_identity_at_zero(self, rng):
        h = rng.normal(size=(5, 5))
        h = h + h.T
        assert np.abs(dense_propagator(h, 0.0) - np.eye(5)).max() < 1e-14

    def test_diagonal_phases(self):
        h = np.diag([1.0, 2.0, 3.0])
        u = dense_propagator(h, 0.7)
        assert np.allclose(np.diag(u), np.exp(-1j * np.array([1, 2, 3]) * 0.7))

    def test_group_property(self, rng):
        h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        h = h + h.conj().T
        u1, u2, u12 = (dense_propagator(h, t) for t in (0.3, 1.1, 1.4))
        assert np.abs(u1 @ u2 - u12).max() < 1e-12

    def test_norm_conserved(self, rng):
        h = rng.normal(size=(8, 8))
        h = h + h.T
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        assert abs(np.linalg.norm(dense_propagator(h, 2.5) @ v) - 1) < 1e-12

    def test_rejects_non_hermitian(self, rng):
        with pytest.raises(DeviceError):
            dense_propagator(rng.normal(size=(4, 4)), 1.0)


DEVICE_TEXT = """\
# two transmons on one bus
ntr 2
nres 1
transmon 0 EC 0.301 EJ 13.349
transmon 1 EC 0.301 EJ 12.292
resonator 0 Omega 7.0 offset 0
G 0 0 0.07
G 0 1 0.07
"""


class TestDeviceFile:
    def test_round_trip(self, two_transmon_device):
        parsed = parse_device(DEVICE_TEXT)
        assert parsed == two_transmon_device
        assert parse_device(format_device(parsed)) == parsed

    def test_unknown_key(self):
        with pytest.raises(DeviceError, match="line 2"):
            parse_device("ntr 1\nfrobnicate 3\n")

    def test_missing_site(self):
        with pytest.raises(DeviceError, match="missing"):
            parse_device("ntr 2\nnres 0\ntransmon 0 EC 0.3 EJ 12.0\n")

    def test_malformed_transmon(self):
        with pytest.raises(DeviceError, match="line 3"):
            parse_device("ntr 1\nnres 0\ntransmon 0 EC oops EJ 12\n")

    def test_memory_budget(self):
        with pytest.raises(DeviceError, match="memory budget"):
            make_device([(0.3, 12.0)] * 3, [(5.0, 0)], max_dim=4 ** 3)

    def test_coupling_index_ranges(self):
        with pytest.raises(DeviceError):
            make_device([(0.3, 12.0)], [(5.0, 0)], g={(1, 0): 0.05})
        with pytest.raises(DeviceError):
            make_device([(0.3, 12.0)] * 2, [(5.0, 0)], ecc={(1, 0): 0.05})


class TestDenseHamiltonian:
    def test_matches_h0_plus_coupling(self, kit_device, kit_basis):
        h = dense_hamiltonian(kit_device)
        assert np.abs(h - h.conj().T).max() < 1e-12
        w = h - np.diag(h0_energies(kit_device))
        field = kit_basis.resonators[0].field_elems
        charge = kit_basis.transmons[0].charge_elems
        expect = TWOPI * 0.0349 * np.kron(field, charge)
        assert np.abs(w - expect).max() < 1e-12

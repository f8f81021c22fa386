import math

import numpy as np
import pytest

from transmonsim import solver as sv
from transmonsim.device import TWOPI, dense_hamiltonian, dense_propagator, device_basis, make_device
from transmonsim.evaluator import overlap, trajectory_error


def random_state(ntr, nres, rng):
    dim = 4 ** (ntr + nres)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return sv.StateVector(ntr, nres, z / np.linalg.norm(z))


class TestPacking:
    def test_ground(self):
        assert sv.pack_index([0], [0]) == 0

    def test_bit_layout(self):
        assert sv.pack_index([2], [1]) == 0b1001

    def test_round_trip_exhaustive(self):
        for km in range(4 ** 4):
            ks, ms = sv.unpack_index(km, 2, 2)
            assert sv.pack_index(ks, ms) == km

    def test_range_checks(self):
        with pytest.raises(sv.SolverError):
            sv.pack_index([4], [0])
        with pytest.raises(sv.SolverError):
            sv.pack_index([0] * 20, [0] * 12)


class TestApplyDiagonal:
    def test_zero_dt(self, rng):
        st = random_state(1, 1, rng)
        before = st.coeffs.copy()
        sv.apply_diagonal(st, np.arange(16.0), 0.0)
        assert np.array_equal(st.coeffs, before)

    def test_global_phase(self, rng):
        st = random_state(1, 1, rng)
        probs = np.abs(st.coeffs) ** 2
        sv.apply_diagonal(st, np.full(16, 2.5), 0.3)
        assert np.allclose(np.abs(st.coeffs) ** 2, probs, atol=1e-15)

    def test_single_element_phase(self):
        st = sv.StateVector.basis_state([1], [2])
        energies = np.arange(16.0)
        km = sv.pack_index([1], [2])
        sv.apply_diagonal(st, energies, 0.5)
        assert np.angle(st.coeffs[km]) == pytest.approx(-energies[km] * 0.5)


class TestSiteTransform:
    def test_identity(self, rng):
        st = random_state(2, 1, rng)
        before = st.coeffs.copy()
        sv.apply_site_transform(st, 1, np.eye(4, dtype=complex))
        assert np.allclose(st.coeffs, before, atol=1e-15)

    def test_single_site_equals_matvec(self, rng):
        u4 = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        st = random_state(1, 0, rng)
        expect = u4 @ st.coeffs
        sv.apply_site_transform(st, 0, u4)
        assert np.allclose(st.coeffs, expect, atol=1e-14)

    @pytest.mark.parametrize("site", [0, 1, 2])
    def test_strategies_bitwise_identical(self, rng, site):
        u4 = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        st0 = random_state(2, 1, rng)
        results = []
        for strategy in (0, 1, 2):
            st = st0.copy()
            sv.apply_site_transform(st, site, u4, strategy=strategy)
            results.append(st.coeffs)
        assert np.array_equal(results[0], results[1])
        assert np.array_equal(results[0], results[2])

    def test_thread_count_bitwise_identical(self, rng):
        u4 = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        st0 = random_state(3, 1, rng)
        st1, st2 = st0.copy(), st0.copy()
        sv.apply_site_transform(st1, 2, u4, strategy=1, threads=1)
        sv.apply_site_transform(st2, 2, u4, strategy=1, threads=4)
        assert np.array_equal(st1.coeffs, st2.coeffs)

    def test_validates_input(self, rng):
        st = random_state(1, 1, rng)
        with pytest.raises(sv.SolverError):
            sv.apply_site_transform(st, 5, np.eye(4))
        with pytest.raises(sv.SolverError):
            sv.apply_site_transform(st, 0, np.ones((4, 4)))


class TestBuildLambda:
    def test_no_couplings(self):
        dev = make_device([(0.3, 12.0)], [(5.0, 0)])
        assert np.all(sv.build_lambda(dev, None) == 0.0)

    def test_single_coupling_product_form(self, kit_device):
        basis = device_basis(kit_device)
        lam = sv.build_lambda(kit_device, basis)
        la, ln = basis.resonators[0].lam_a, basis.transmons[0].lam_n
        for km in range(16):
            k, m = km >> 2, km & 3
            assert lam[km] == pytest.approx(TWOPI * 0.0349 * la[k] * ln[m], rel=1e-12)

    def test_matches_dense_exponential(self, two_transmon_device):
        # the V-sandwiched diagonal is the exact eigenvalue form of W, not a split
        dev = two_transmon_device
        data = sv._evolution_data(dev)
        tau = 1e-3
        v_full = np.array([[1.0]], dtype=complex)
        for s in range(dev.nsites):
            v_full = np.kron(v_full, data.v_site[s])
        lam = sv.build_lambda(dev, None)
        w = dense_hamiltonian(dev) - np.diag(sv.h0_energies_cached(dev))
        exact = dense_propagator(w, tau)
        approx = v_full @ np.diag(np.exp(-1j * tau * lam)) @ v_full.conj().T
        assert np.abs(exact - approx).max() < 1e-10


class TestStep:
    def test_local_error_slopes(self, kit_device):
        plus = np.array([1, 1, 0, 0]) / math.sqrt(2)
        psi0 = sv.StateVector.product([[1, 0, 0, 0]], [plus])
        h = dense_hamiltonian(kit_device)
        taus = np.logspace(-3, -1, 9)
        norm_err, ovl_err = [], []
        for tau in taus:
            st = psi0.copy()
            sv.step(st, kit_device, None, None, 0.0, tau)
            exact = dense_propagator(h, tau) @ psi0.coeffs
            norm_err.append(np.linalg.norm(st.coeffs - exact))
            ovl_err.append(max(1.0 - abs(np.vdot(st.coeffs, exact)) ** 2, 1e-300))
        slope_norm = np.polyfit(np.log(taus), np.log(norm_err), 1)[0]
        keep = np.array(ovl_err) > 1e-12
        slope_ovl = np.polyfit(np.log(taus[keep]), np.log(np.array(ovl_err)[keep]), 1)[0]
        assert slope_norm == pytest.approx(3.0, abs=0.2)
        assert slope_ovl == pytest.approx(6.0, abs=0.4)

    def test_small_step_limit(self, kit_device):
        psi0 = sv.StateVector.product([[1, 0, 0, 0]], [np.array([1, 1, 0, 0]) / math.sqrt(2)])
        diffs = []
        for tau in (1e-3, 1e-4):
            st = psi0.copy()
            sv.step(st, kit_device, None, None, 0.0, tau)
            diffs.append(np.linalg.norm(st.coeffs - psi0.coeffs))
        assert diffs[1] == pytest.approx(diffs[0] / 10.0, rel=0.05)


class TestEvolve:
    def test_snapshot_at_zero(self, kit_device):
        st = sv.StateVector.ground(1, 1)
        traj = sv.evolve(st, kit_device, None, sv.SolverConfig(snapshot_times=(0.0,)))
        assert len(traj) == 1
        assert np.array_equal(traj.states[0], sv.StateVector.ground(1, 1).coeffs)

    def test_off_grid_snapshot_rejected(self, kit_device):
        st = sv.StateVector.ground(1, 1)
        with pytest.raises(sv.SolverError, match="multiples of tau"):
            sv.evolve(st, kit_device, None,
                      sv.SolverConfig(tau=1e-3, snapshot_times=(0.00055,)))

    def test_norm_conservation(self, two_transmon_device, rng):
        st = random_state(2, 1, rng)
        traj = sv.evolve(st, two_transmon_device, None,
                         sv.SolverConfig(tau=1e-3, snapshot_times=(200.0,)))
        assert abs(np.linalg.norm(traj.states[-1]) - 1.0) < 1e-9

    def test_reversibility(self, two_transmon_device, rng):
        st = random_state(2, 1, rng)
        start = st.coeffs.copy()
        sv._run_steps(st, two_transmon_device, None, 0.0, 1e-3, 5000, 2, 1,
                      np.zeros(0, dtype=np.int64))
        sv._run_steps(st, two_transmon_device, None, 5.0, -1e-3, 5000, 2, 1,
                      np.zeros(0, dtype=np.int64))
        assert np.linalg.norm(st.coeffs - start) < 1e-8

    def test_matches_dense_oracle(self, kit_device):
        plus = np.array([1, 1, 0, 0]) / math.sqrt(2)
        psi0 = sv.StateVector.product([[1, 0, 0, 0]], [plus])
        times = tuple(np.arange(1.0, 101.0))
        traj = sv.evolve(psi0.copy(), kit_device, None,
                         sv.SolverConfig(tau=1e-3, snapshot_times=times))
        h = dense_hamiltonian(kit_device)
        mean_err = 0.0
        for n, t in enumerate(times):
            exact = dense_propagator(h, t) @ psi0.coeffs
            mean_err += 1.0 - overlap(traj.states[n], exact)
        assert mean_err / len(times) < 1e-6

    def test_strategy_equivalence_in_evolution(self, two_transmon_device, rng):
        st0 = random_state(2, 1, rng)
        outs = []
        for strategy in (0, 1, 2):
            traj = sv.evolve(st0.copy(), two_transmon_device, None,
                             sv.SolverConfig(tau=1e-3, strategy=sv.LoopStrategy(strategy),
                                             snapshot_times=(1.0,)))
            outs.append(traj.states[-1])
        assert np.array_equal(outs[0], outs[1])
        assert np.array_equal(outs[0], outs[2])


class TestRotatingFrame:
    def test_identity_at_zero(self, rng):
        st = random_state(2, 1, rng)
        before = st.coeffs.copy()
        sv.to_rotating_frame(st, [5.0, 5.1], t=0.0)
        assert np.array_equal(st.coeffs, before)

    def test_phase_of_excited_state(self):
        st = sv.StateVector.basis_state([0], [1, 0])
        km = sv.pack_index([0], [1, 0])
        sv.to_rotating_frame(st, [5.0, 4.9], t=0.37)
        assert np.angle(st.coeffs[km]) == pytest.approx(TWOPI * 5.0 * 0.37 % (2 * math.pi) - 2 * math.pi, abs=1e-12)

    def test_probabilities_unchanged(self, rng):
        st = random_state(2, 1, rng)
        probs = np.abs(st.coeffs) ** 2
        sv.to_rotating_frame(st, [5.0, 5.1], t=13.7)
        assert np.abs(np.abs(st.coeffs) ** 2 - probs).max() < 1e-15


class TestProjection:
    def test_ground_state(self):
        st = sv.StateVector.ground(2, 1)
        kept, leak = sv.project_computational(st)
        assert kept[0] == 1.0 and leak == pytest.approx(0.0, abs=1e-15)

    def test_fully_leaked(self):
        st = sv.StateVector.basis_state([0], [2])
        kept, leak = sv.project_computational(st)
        assert np.all(kept == 0.0)
        assert leak == pytest.approx(1.0)

    def test_partition_of_unity(self, rng):
        st = random_state(2, 1, rng)
        kept, leak = sv.project_computational(st)
        assert np.linalg.norm(kept) ** 2 + leak == pytest.approx(1.0, abs=1e-12)


class TestStateIO:
    def test_binary_round_trip(self, rng, tmp_path):
        st = random_state(2, 1, rng)
        st.t = 17.25
        path = tmp_path / "state.bin"
        sv.save_state_binary(st, path)
        back = sv.load_state_binary(path)
        assert np.array_equal(back.coeffs, st.coeffs)
        assert back.t == st.t

    def test_text_round_trip(self, rng, tmp_path):
        st = random_state(1, 1, rng)
        path = tmp_path / "state.txt"
        sv.save_state_text(st, path)
        back = sv.load_state_text(path)
        assert np.abs(back.coeffs - st.coeffs).max() < 1e-15

    def test_truncated_binary(self, rng, tmp_path):
        st = random_state(1, 1, rng)
        path = tmp_path / "state.bin"
        sv.save_state_binary(st, path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(sv.SolverError, match="truncated"):
            sv.load_state_binary(path)

    def test_header_mismatch(self, rng, tmp_path):
        st = random_state(1, 1, rng)
        path = tmp_path / "state.bin"
        sv.save_state_binary(st, path)
        with pytest.raises(sv.SolverError, match="expected"):
            sv.load_state_binary(path, expect=(2, 1))

import math

import numpy as np
import pytest

from transmonsim import channels as ch


def random_density(n_qubits, rng):
    dim = 2 ** n_qubits
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def bloch_of(rho):
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return np.array([np.trace(p @ rho).real for p in (sx, sy, sz)])


class TestApplyGate:
    def test_identity(self, rng):
        rho = random_density(2, rng)
        out = ch.apply_gate(rho, np.eye(2), [1])
        assert np.abs(out - rho).max() < 1e-14

    def test_bit_flip(self):
        rho = ch.DensityMatrix.ground(1).rho
        out = ch.apply_gate(rho, np.array([[0, 1], [1, 0]], dtype=complex), [0])
        assert out[1, 1] == pytest.approx(1.0)

    def test_purity_preserved_by_circuit(self, rng):
        rho = ch.DensityMatrix.ground(3).rho
        h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        cnot = ch._CNOT
        for _ in range(20):
            q = int(rng.integers(0, 3))
            if rng.random() < 0.5:
                rho = ch.apply_gate(rho, h, [q])
            else:
                t = int((q + 1) % 3)
                rho = ch.apply_gate(rho, cnot, [q, t])
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-12)

    def test_embedding_matches_kron(self, rng):
        # oracle: build the full unitary by hand for a 2-qubit gate on (1, 0)
        rho = random_density(2, rng)
        u = np.kron(np.diag([1.0, 1j]), np.array([[0, 1], [1, 0]])).astype(complex)
        swap = np.eye(4)[[0, 2, 1, 3]]
        u_swapped = swap @ u @ swap  # acting on (q1, q0) instead
        out = ch.apply_gate(rho, u, [1, 0])
        expect = u_swapped @ rho @ u_swapped.conj().T
        assert np.abs(out - expect).max() < 1e-13


class TestDepolarizing:
    def test_identity_at_zero(self, rng):
        rho = random_density(2, rng)
        out = ch.apply_depolarizing(rho, 0, 0.0, 0.0, 0.0)
        assert np.abs(out - rho).max() < 1e-14

    def test_symmetric_form_is_mixture(self, rng):
        # symmetric channel with p_x=p_y=p_z=(1-F)/4 equals F rho + (1-F) I/2
        rho = random_density(1, rng)
        f = 0.82
        p = (1 - f) / 4
        out = ch.apply_depolarizing(rho, 0, p, p, p)
        expect = (f + (1 - f) / 2) * rho + ((1 - f) / 2) * np.eye(2) / 1.0
        # direct oracle via Bloch scaling: r -> (1 - 2(py+pz), ...) r
        r = bloch_of(rho)
        r_out = bloch_of(out)
        scale = np.array([1 - 2 * (p + p), 1 - 2 * (p + p), 1 - 2 * (p + p)])
        assert np.allclose(r_out, scale * r, atol=1e-12)

    def test_bloch_scaling(self, rng):
        px, py, pz = 0.02, 0.05, 0.11
        rho = random_density(1, rng)
        out = ch.apply_depolarizing(rho, 0, px, py, pz)
        scale = np.array([1 - 2 * (py + pz), 1 - 2 * (px + pz), 1 - 2 * (px + py)])
        assert np.allclose(bloch_of(out), scale * bloch_of(rho), atol=1e-12)

    def test_quarter_probabilities_erase_bloch(self, rng):
        rho = random_density(1, rng)
        out = ch.apply_depolarizing(rho, 0, 0.25, 0.25, 0.25)
        assert np.abs(bloch_of(out)).max() < 1e-12

    def test_trace_and_psd(self, rng):
        for _ in range(20):
            rho = random_density(2, rng)
            out = ch.apply_depolarizing(rho, 1, 0.1, 0.05, 0.2)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
            ch.validate_density(out)

    def test_invalid_probabilities(self, rng):
        rho = random_density(1, rng)
        with pytest.raises(ch.ChannelError):
            ch.apply_depolarizing(rho, 0, 0.5, 0.4, 0.2)


class TestAmpDamp:
    def test_identity_at_zero_gamma(self, rng):
        rho = random_density(1, rng)
        out = ch.apply_amp_damp(rho, 0, 0.5, 0.0)
        assert np.abs(out - rho).max() < 1e-14

    def test_full_decay(self, rng):
        rho = random_density(2, rng)
        out = ch.apply_amp_damp(rho, 1, 1.0, 1.0)
        # qubit 1 fully reset to |0>
        marg = out.reshape(2, 2, 2, 2)
        assert np.trace(marg[:, 1, :, 1]).real == pytest.approx(0.0, abs=1e-12)

    def test_excited_population_scaling(self, rng):
        rho = random_density(1, rng)
        gamma = 0.37
        out = ch.apply_amp_damp(rho, 0, 1.0, gamma)
        assert out[1, 1].real == pytest.approx((1 - gamma) * rho[1, 1].real, abs=1e-12)

    def test_trace_preserved(self, rng):
        for _ in range(10):
            rho = random_density(2, rng)
            out = ch.apply_amp_damp(rho, 0, 0.8, 0.3)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
            ch.validate_density(out)


class TestMeasurement:
    def test_distribution_normalized(self, rng):
        rho = random_density(3, rng)
        p = ch.measure_distribution(rho)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_meas_error_trivials(self):
        p = np.array([1.0, 0.0])
        assert np.allclose(ch.apply_meas_error(p, 0.0), p)
        assert np.allclose(ch.apply_meas_error(p, 0.1), [0.9, 0.1])
        assert np.allclose(ch.apply_meas_error(np.array([0.7, 0.3]), 0.5), [0.5, 0.5])

    def test_meas_error_matches_hamming_formula(self, rng):
        # brute-force oracle over Hamming distances
        n = 3
        p = rng.random(2 ** n)
        p /= p.sum()
        eps = 0.08
        expect = np.zeros(2 ** n)
        for j in range(2 ** n):
            for jp in range(2 ** n):
                d = bin(j ^ jp).count("1")
                expect[j] += p[jp] * eps ** d * (1 - eps) ** (n - d)
        assert np.allclose(ch.apply_meas_error(p, eps), expect, atol=1e-14)

    def test_stochastic(self, rng):
        p = rng.random(8)
        out = ch.apply_meas_error(p, 0.3)
        assert out.sum() == pytest.approx(p.sum(), abs=1e-15)


class TestSinglet:
    def test_ideal_distribution(self, rng):
        # channel-free case must match (1 - (-1)^(j0+j1) cos(t1-t0)) / 4 exactly
        for _ in range(100):
            t0, t1 = rng.uniform(0, 2 * math.pi, size=2)
            e01, e0, e1, p = ch.singlet_experiment(t0, t1)
            for j0 in (0, 1):
                for j1 in (0, 1):
                    want = (1 - (-1) ** (j0 + j1) * math.cos(t1 - t0)) / 4
                    assert p[2 * j0 + j1] == pytest.approx(want, abs=1e-12)
            assert e01 == pytest.approx(-math.cos(t1 - t0), abs=1e-12)
            assert e0 == pytest.approx(0.0, abs=1e-12)
            assert e1 == pytest.approx(0.0, abs=1e-12)

    def test_equal_angles(self):
        e01, _, _, p = ch.singlet_experiment(0.7, 0.7)
        assert e01 == pytest.approx(-1.0, abs=1e-12)
        assert p[0] == pytest.approx(0.0, abs=1e-12)
        assert p[3] == pytest.approx(0.0, abs=1e-12)
        assert p[1] == pytest.approx(0.5, abs=1e-12)

    def test_quarter_turn(self):
        e01, _, _, _ = ch.singlet_experiment(0.0, math.pi / 2)
        assert e01 == pytest.approx(0.0, abs=1e-12)

    def test_reference_channel_offsets(self):
        # decay-dominated channels push both single-qubit expectations positive
        # and shrink the correlation amplitude
        channels = ch.QubitChannels(
            dep={0: (0.007, 0.001, 0.0), 1: (0.001, 0.001, 0.003)},
            amp={0: (0.818, 0.092), 1: (0.980, 0.053)},
        )
        grid = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        e0s, e1s, e01s = [], [], []
        for t0 in grid:
            e01, e0, e1, _ = ch.singlet_experiment(t0, 0.0, channels)
            e0s.append(e0)
            e1s.append(e1)
            e01s.append(e01)
        assert min(e0s) > 0.01
        assert min(e1s) > 0.01
        assert max(np.abs(e01s)) < 0.99

    def test_channel_file_parse(self):
        text = "dep 0 0.007 0.001 0.0\namp 1 0.98 0.053\nmeas 0.08\n"
        parsed = ch.parse_channel_file(text)
        assert parsed.dep[0] == (0.007, 0.001, 0.0)
        assert parsed.amp[1] == (0.98, 0.053)
        assert parsed.meas_eps == 0.08
        with pytest.raises(ch.ChannelError, match="line 1"):
            ch.parse_channel_file("bogus 1 2\n")

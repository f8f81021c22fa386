import math

import numpy as np
import pytest

from transmonsim import circuits as cc
from transmonsim import pulses as pl


def unitary_from_micro_ops(ops, n):
    """Independent reference: multiply each micro-op's matrix in time order."""
    rx_half = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2)
    u = np.eye(2 ** n, dtype=complex)
    for op in ops:
        if op[0] == "vz":
            g = cc._embed(np.diag([np.exp(-0.5j * op[2]), np.exp(0.5j * op[2])]), (op[1],), n)
        elif op[0] == "gd_half":
            g = cc._embed(rx_half, (op[1],), n)
        elif op[0] == "zero":
            continue
        else:
            g = cc._embed(cc.CNOT_MATRIX, (op[1], op[2]), n)
        u = g @ u
    return u


def phase_free_diff(a, b):
    tr = np.trace(a @ b.conj().T)
    z = tr / abs(tr) if abs(tr) > 1e-12 else 1.0
    return np.abs(a - z * b).max()


class TestParse:
    def test_basic(self):
        circ = cc.parse_circuit("H 0\nCNOT 0 1\n")
        assert circ.n_qubits == 2
        assert len(circ.gates) == 2

    def test_minus_y_normalization(self):
        gate = cc.parse_circuit("-Y 0").gates[0]
        norm = cc.normalize_gate(gate)
        assert norm.name == "U2"
        assert norm.params == (0.0, 0.0)

    def test_phase_gate(self):
        gate = cc.parse_circuit("R 0 3").gates[0]
        norm = cc.normalize_gate(gate)
        assert norm.name == "U1"
        assert norm.params[0] == pytest.approx(2 * math.pi / 8)

    def test_comments_ignored(self):
        circ = cc.parse_circuit("# a comment\nH 0  # trailing\n\n")
        assert len(circ.gates) == 1

    def test_unknown_gate(self):
        with pytest.raises(cc.CircuitError, match="line 2"):
            cc.parse_circuit("H 0\nFOO 1\n")

    def test_bad_arity(self):
        with pytest.raises(cc.CircuitError, match="line 1"):
            cc.parse_circuit("CNOT 0\n")
        with pytest.raises(cc.CircuitError, match="line 1"):
            cc.parse_circuit("U2 0 1.0\n")


class TestGateTable:
    @pytest.mark.parametrize("name", ["X", "Y", "Z", "H", "S", "Sdag", "T", "Tdag",
                                      "+X", "-X", "+Y", "-Y"])
    def test_u_decomposition_round_trip(self, name):
        gate = cc.Gate(name, (0,))
        direct = cc.gate_matrix(gate)
        via_u = cc.gate_matrix(cc.normalize_gate(gate))
        assert phase_free_diff(direct, via_u) < 1e-12

    def test_expected_matrices(self):
        assert np.allclose(cc.gate_matrix(cc.Gate("X", (0,))), [[0, 1], [1, 0]])
        assert np.allclose(cc.gate_matrix(cc.Gate("H", (0,))),
                           np.array([[1, 1], [1, -1]]) / math.sqrt(2))
        s = cc.gate_matrix(cc.Gate("S", (0,)))
        assert np.allclose(s, np.diag([1, 1j]))


class TestLowering:
    def test_u1_folding(self):
        ops = cc.lower_to_elementary(cc.parse_circuit("U1 0 0.4\nU1 0 0.5\n"))
        assert ops == [("vz", 0, pytest.approx(0.9))]

    def test_minus_y_collapses(self, two_transmon_library):
        sched = cc.compile_circuit(cc.parse_circuit("-Y 0"), two_transmon_library)
        gauss = [s for s in sched.segments if s.shape is pl.Shape.GAUSS]
        assert len(gauss) == 1
        assert gauss[0].phase == pytest.approx(math.pi / 2)

    def test_x_is_two_half_pulses(self):
        ops = cc.lower_to_elementary(cc.parse_circuit("X 0"))
        assert sum(1 for op in ops if op[0] == "gd_half") == 2

    def test_semantics_random_circuits(self, rng):
        # lowering preserves the unitary up to a global phase
        names = ["H", "X", "Y", "Z", "S", "T", "Sdag", "Tdag", "+X", "-Y", "U1", "U2", "U3"]
        for _ in range(200):
            n = int(rng.integers(2, 4))
            lines = []
            for _ in range(int(rng.integers(1, 8))):
                if rng.random() < 0.25:
                    q = rng.choice(n, size=2, replace=False)
                    lines.append(f"CNOT {q[0]} {q[1]}")
                else:
                    name = names[int(rng.integers(0, len(names)))]
                    q = int(rng.integers(0, n))
                    n_params = {"U1": 1, "U2": 2, "U3": 3}.get(name, 0)
                    params = " ".join(f"{rng.uniform(-math.pi, math.pi):.6f}"
                                      for _ in range(n_params))
                    lines.append(f"{name} {q} {params}".strip())
            text = "\n".join(lines) + f"\nI {n - 1}\n"
            circ = cc.parse_circuit(text)
            expect = cc.ideal_unitary(circ)
            got = unitary_from_micro_ops(cc.lower_to_elementary(circ), circ.n_qubits)
            assert phase_free_diff(expect, got) < 1e-12


class TestIdealUnitary:
    def test_empty_circuit(self):
        assert np.array_equal(cc.ideal_unitary(cc.Circuit(2, ())), np.eye(4))

    def test_cnot(self):
        u = cc.ideal_unitary(cc.parse_circuit("CNOT 0 1"))
        assert np.array_equal(u, cc.CNOT_MATRIX)

    def test_two_qubit_fourier(self):
        text = ("H 0\nTdag 0\nCNOT 1 0\nTdag 0\nCNOT 1 0\nS 0\nT 1\nH 1\n"
                "CNOT 0 1\nCNOT 1 0\nCNOT 0 1\n")
        u = cc.ideal_unitary(cc.parse_circuit(text))
        expect = 0.5 * np.array([[1, 1, 1, 1],
                                 [1, 1j, -1, -1j],
                                 [1, -1, 1, -1],
                                 [1, -1j, -1, 1j]], dtype=complex)
        assert phase_free_diff(u, expect) < 1e-12


class TestCompile:
    def test_reference_schedule(self, two_transmon_library):
        circ = cc.parse_circuit("-Y 0\nCNOT 0 1")
        sched = cc.compile_circuit(circ, two_transmon_library)
        assert sched.duration == pytest.approx(514.950, abs=1e-9)
        kinds = [s.shape.value for s in sched.segments]
        assert kinds.count("gaussflat") == 2

    def test_empty_circuit(self, two_transmon_library):
        sched = cc.compile_circuit(cc.Circuit(0, ()), two_transmon_library)
        assert sched.duration == 0.0

    def test_virtual_only_circuit(self, two_transmon_library):
        circ = cc.parse_circuit("U1 0 0.3\nZ 1\nS 0\n")
        sched = cc.compile_circuit(circ, two_transmon_library)
        assert sched.duration == 0.0
        assert not sched.segments

    def test_deterministic(self, two_transmon_library):
        circ = cc.parse_circuit("H 0\nCNOT 0 1\nT 1\nH 1\n")
        a = pl.format_schedule(cc.compile_circuit(circ, two_transmon_library))
        b = pl.format_schedule(cc.compile_circuit(circ, two_transmon_library))
        assert a == b

    def test_identity_gate_consumes_time(self, two_transmon_library):
        sched = cc.compile_circuit(cc.parse_circuit("I 0"), two_transmon_library)
        assert sched.duration == pytest.approx(83.0)
        assert sched.segments[0].shape is pl.Shape.ZERO

    def test_missing_pulse_error(self, two_transmon_library):
        with pytest.raises(cc.CircuitError, match="xpih-2"):
            cc.compile_circuit(cc.parse_circuit("H 2"), two_transmon_library)
        with pytest.raises(cc.CircuitError, match="cnot-1-0"):
            lib = pl.PulseLibrary(gd_half=dict(two_transmon_library.gd_half),
                                  gd_pi=dict(two_transmon_library.gd_pi), cnot={})
            cc.compile_circuit(cc.parse_circuit("CNOT 1 0"), lib)

    def test_parallel_layout_overlaps_disjoint_gates(self, two_transmon_library):
        circ = cc.parse_circuit("H 0\nH 1\n")
        seq = cc.compile_circuit(circ, two_transmon_library, parallel=False)
        par = cc.compile_circuit(circ, two_transmon_library, parallel=True)
        assert seq.duration == pytest.approx(166.0)
        assert par.duration == pytest.approx(83.0)

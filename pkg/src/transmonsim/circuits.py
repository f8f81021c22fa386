"""Text circuits, gate lowering, and compilation to pulse schedules.

Every single-qubit gate is rewritten through the elementary U1/U2/U3 forms,
which in turn reduce to virtual Z rotations around at most two physical
pi/2 pulses:

    U1(lam)          -> Z(lam)                      (no pulse)
    U2(phi, lam)     -> Z(phi+pi/2) X(pi/2) Z(lam-pi/2)
    U3(th, phi, lam) -> Z(phi+3pi) X(pi/2) Z(th+pi) X(pi/2) Z(lam)

Global phases are dropped.  Compilation lays micro-ops out sequentially
(each starts when the previous one ends) unless ``parallel`` is requested,
in which case operations on disjoint qubits may overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pulses import PulseLibrary, PulseSchedule, VZRegister, cnot_duration, emit_cnot, emit_gd, emit_zero


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    params: tuple = ()


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple

    def __post_init__(self):
        for g in self.gates:
            if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                raise CircuitError(f"gate {g.name} touches qubit outside 0..{self.n_qubits - 1}")


def u1_matrix(lam):
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * lam)]])


def u2_matrix(phi, lam):
    return np.array([[1.0, -np.exp(1j * lam)],
                     [np.exp(1j * phi), np.exp(1j * (phi + lam))]]) / math.sqrt(2.0)


def u3_matrix(theta, phi, lam):
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


CNOT_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

# name -> (n_qubits, n_params, U-decomposition builder); None means no single U form
_GATES = {
    "I":    (1, 0, lambda: None),
    "U1":   (1, 1, lambda lam: ("U1", (lam,))),
    "U2":   (1, 2, lambda phi, lam: ("U2", (phi, lam))),
    "U3":   (1, 3, lambda th, phi, lam: ("U3", (th, phi, lam))),
    "X":    (1, 0, lambda: ("U3", (math.pi, 0.0, math.pi))),
    "Y":    (1, 0, lambda: ("U3", (math.pi, math.pi / 2, math.pi / 2))),
    "Z":    (1, 0, lambda: ("U1", (math.pi,))),
    "H":    (1, 0, lambda: ("U2", (0.0, math.pi))),
    "S":    (1, 0, lambda: ("U1", (math.pi / 2,))),
    "Sdag": (1, 0, lambda: ("U1", (-math.pi / 2,))),
    "T":    (1, 0, lambda: ("U1", (math.pi / 4,))),
    "Tdag": (1, 0, lambda: ("U1", (-math.pi / 4,))),
    "+X":   (1, 0, lambda: ("U2", (math.pi / 2, -math.pi / 2))),
    "-X":   (1, 0, lambda: ("U2", (-math.pi / 2, math.pi / 2))),
    "+Y":   (1, 0, lambda: ("U2", (-math.pi, math.pi))),
    "-Y":   (1, 0, lambda: ("U2", (0.0, 0.0))),
    "R":    (1, 1, lambda k: ("U1", (2.0 * math.pi / 2 ** int(k),))),
    "CNOT": (2, 0, lambda: None),
}


def gate_matrix(gate: Gate) -> np.ndarray:
    """Matrix of one gate on its own qubits (2x2 or the CNOT 4x4)."""
    if gate.name == "CNOT":
        return CNOT_MATRIX
    if gate.name == "I":
        return np.eye(2, dtype=complex)
    if gate.name == "U1":
        return u1_matrix(*gate.params)
    if gate.name == "U2":
        return u2_matrix(*gate.params)
    if gate.name == "U3":
        return u3_matrix(*gate.params)
    kind, params = _GATES[gate.name][2](*gate.params)
    return {"U1": u1_matrix, "U2": u2_matrix, "U3": u3_matrix}[kind](*params)


def normalize_gate(gate: Gate) -> Gate:
    """Rewrite any single-qubit gate as its U1/U2/U3 form (CNOT and I pass through)."""
    if gate.name in ("CNOT", "I", "U1", "U2", "U3"):
        return gate
    kind, params = _GATES[gate.name][2](*gate.params)
    return Gate(kind, gate.qubits, tuple(float(p) for p in params))


def parse_circuit(text: str) -> Circuit:
    """One gate per line: mnemonic, qubit indices, then angle parameters."""
    gates = []
    max_q = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        name = tok[0]
        if name not in _GATES:
            raise CircuitError(f"circuit line {lineno}: unknown gate {name!r}")
        n_q, n_p, _ = _GATES[name]
        if len(tok) != 1 + n_q + n_p:
            raise CircuitError(
                f"circuit line {lineno}: {name} takes {n_q} qubit(s) and {n_p} parameter(s)"
            )
        try:
            qubits = tuple(int(q) for q in tok[1:1 + n_q])
            params = tuple(float(p) for p in tok[1 + n_q:])
        except ValueError as exc:
            raise CircuitError(f"circuit line {lineno}: {exc}") from exc
        if name == "CNOT" and qubits[0] == qubits[1]:
            raise CircuitError(f"circuit line {lineno}: CNOT needs two distinct qubits")
        if any(q < 0 for q in qubits):
            raise CircuitError(f"circuit line {lineno}: negative qubit index")
        max_q = max(max_q, *qubits)
        gates.append(Gate(name, qubits, params))
    return Circuit(n_qubits=max_q + 1 if max_q >= 0 else 0, gates=tuple(gates))


def load_circuit(path) -> Circuit:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# ---------------------------------------------------------------------------
# lowering
# ---------------------------------------------------------------------------

def lower_to_elementary(circuit: Circuit) -> list:
    """Micro-op stream: ('vz', q, theta) / ('gd_half', q) / ('zero', q) / ('cnot', c, t).

    Adjacent virtual-Z ops on the same qubit are folded; zero-angle VZ ops
    are dropped.
    """
    ops: list = []

    def push_vz(q, theta):
        theta = math.remainder(theta, 2.0 * math.pi)
        if ops and ops[-1][0] == "vz" and ops[-1][1] == q:
            merged = math.remainder(ops[-1][2] + theta, 2.0 * math.pi)
            ops.pop()
            if abs(merged) > 1e-15:
                ops.append(("vz", q, merged))
            return
        if abs(theta) > 1e-15:
            ops.append(("vz", q, theta))

    for gate in circuit.gates:
        if gate.name == "CNOT":
            ops.append(("cnot", gate.qubits[0], gate.qubits[1]))
            continue
        if gate.name == "I":
            ops.append(("zero", gate.qubits[0]))
            continue
        g = normalize_gate(gate)
        q = g.qubits[0]
        if g.name == "U1":
            push_vz(q, g.params[0])
        elif g.name == "U2":
            phi, lam = g.params
            push_vz(q, lam - math.pi / 2)
            ops.append(("gd_half", q))
            push_vz(q, phi + math.pi / 2)
        else:
            th, phi, lam = g.params
            push_vz(q, lam)
            ops.append(("gd_half", q))
            push_vz(q, th + math.pi)
            ops.append(("gd_half", q))
            push_vz(q, phi + 3.0 * math.pi)
    return ops


def compile_circuit(circuit: Circuit, library: PulseLibrary, parallel: bool = False) -> PulseSchedule:
    """Lower a circuit and emit its full pulse schedule.

    Sequential layout by default: each pulse starts when the previous one
    ends, across all qubits.  With ``parallel`` enabled, each qubit keeps its
    own time cursor and only shared operations synchronize.
    """
    ops = lower_to_elementary(circuit)
    vz = VZRegister(circuit.n_qubits)
    schedule = PulseSchedule()
    cursor = np.zeros(circuit.n_qubits)

    def start_for(qubits):
        if parallel:
            return max((cursor[q] for q in qubits), default=0.0)
        return float(cursor.max()) if circuit.n_qubits else 0.0

    def advance(qubits, t_end):
        if parallel:
            for q in qubits:
                cursor[q] = t_end
        else:
            cursor[:] = t_end

    for op in ops:
        if op[0] == "vz":
            vz.apply_vz(op[1], op[2])
        elif op[0] == "gd_half":
            q = op[1]
            p = library.gd_half.get(q)
            if p is None:
                raise CircuitError(f"pulse library has no xpih-{q} entry")
            t0 = start_for((q,))
            segs = emit_gd(q, "HALF", vz, p, t0)
            schedule.extend(segs)
            advance((q,), segs[0].t1)
        elif op[0] == "zero":
            q = op[1]
            p = library.gd_half.get(q)
            if p is None:
                raise CircuitError(f"pulse library has no xpih-{q} entry (needed for idle length)")
            t0 = start_for((q,))
            segs = emit_zero(q, p.t_x, t0)
            schedule.extend(segs)
            advance((q,), segs[0].t1)
        else:
            _, c, t = op
            params = library.cnot.get((c, t))
            if params is None:
                raise CircuitError(f"pulse library has no cnot-{c}-{t} entry")
            t0 = start_for((c, t))
            segs = emit_cnot(c, t, params.scheme, vz, params, library, t0)
            schedule.extend(segs)
            advance((c, t), t0 + cnot_duration(params, library, c, t))
    return schedule.sorted()


# ---------------------------------------------------------------------------
# ideal unitary
# ---------------------------------------------------------------------------

def _embed(u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Embed a gate matrix into the 2^n space (qubit 0 = most significant bit)."""
    dim = 2 ** n
    full = np.zeros((dim, dim), dtype=complex)
    others = [q for q in range(n) if q not in qubits]
    n_other = len(others)
    for rest in range(2 ** n_other):
        base = 0
        for pos, q in enumerate(others):
            base |= ((rest >> (n_other - 1 - pos)) & 1) << (n - 1 - q)
        for a in range(u.shape[0]):
            ia = base
            for pos, q in enumerate(qubits):
                ia |= ((a >> (len(qubits) - 1 - pos)) & 1) << (n - 1 - q)
            for b in range(u.shape[1]):
                ib = base
                for pos, q in enumerate(qubits):
                    ib |= ((b >> (len(qubits) - 1 - pos)) & 1) << (n - 1 - q)
                full[ia, ib] = u[a, b]
    return full


def ideal_unitary(circuit: Circuit) -> np.ndarray:
    """Product of the gate matrices in reversed order (qubit 0 = MSB)."""
    if circuit.n_qubits > 12:
        raise CircuitError("ideal unitary limited to 12 qubits")
    dim = 2 ** circuit.n_qubits
    u = np.eye(dim, dtype=complex)
    for gate in circuit.gates:
        u = _embed(gate_matrix(gate), gate.qubits, circuit.n_qubits) @ u
    return u

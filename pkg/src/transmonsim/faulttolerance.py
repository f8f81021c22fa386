"""[[4,2,2]] error-detection harness: encoding, noisy runs, postselection.

Two logical qubits are either run bare on two physical qubits or encoded on
four physical qubits q1..q4 (plus an ancilla q0 used by the encoded |00>
preparation).  Encoded runs are scored after postselection: shots with the
ancilla set or with odd data parity are discarded, the rest map onto the
four logical code words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .circuits import Circuit, Gate, ideal_unitary
from .metrics import statistical_distance

LOGICAL_GATES = ("X1", "X2", "Z1", "Z2", "HHS", "CZ")
INITIALS = ("00", "0+", "phi+")

#: even-parity four-bit strings (q1 q2 q3 q4) -> logical two-bit outcome
CODEWORDS = {
    "0000": "00", "1111": "00",
    "1100": "01", "0011": "01",
    "1010": "10", "0101": "10",
    "0110": "11", "1001": "11",
}


class FtError(ValueError):
    pass


@dataclass(frozen=True)
class LogicalCircuit:
    id: int
    initial: str
    gates: tuple

    def __post_init__(self):
        if self.initial not in INITIALS:
            raise FtError(f"unknown initial state {self.initial!r}")
        for g in self.gates:
            if g not in LOGICAL_GATES:
                raise FtError(f"unknown logical gate {g!r}")


@dataclass
class PostselectionReport:
    kept_ratio: float
    logical_dist: np.ndarray


@dataclass
class NoiseModel:
    """Per-gate depolarizing noise plus readout bit flips.

    ``depolarizing`` is the total error probability per qubit touched by a
    gate, split evenly over X, Y and Z; ``dep_split`` can override the split.
    """

    depolarizing: float = 0.0
    meas_error: float = 0.0
    dep_split: tuple = (1 / 3, 1 / 3, 1 / 3)

    def dep_params(self):
        p = self.depolarizing
        return tuple(p * w for w in self.dep_split)


# ---------------------------------------------------------------------------
# circuit tables
# ---------------------------------------------------------------------------

# bare versions on two physical qubits (0 -> q3, 1 -> q4)
_BARE_PREP = {
    "00": [],
    "0+": [("H", (1,))],
    "phi+": [("H", (0,)), ("CNOT", (0, 1))],
}
_BARE_GATES = {
    "X1": [("X", (0,))],
    "X2": [("X", (1,))],
    "Z1": [("Z", (0,))],
    "Z2": [("Z", (1,))],
    "HHS": [("H", (0,)), ("H", (1,)), ("CNOT", (0, 1)),
            ("H", (0,)), ("H", (1,)), ("CNOT", (0, 1)),
            ("H", (0,)), ("H", (1,)), ("CNOT", (0, 1))],
    "CZ": [("H", (1,)), ("CNOT", (0, 1)), ("H", (1,))],
}

# encoded versions on five physical qubits q0 (ancilla) .. q4
_ENC_PREP = {
    "00": [("H", (3,)), ("CNOT", (3, 2)), ("CNOT", (2, 1)), ("CNOT", (3, 4)),
           ("CNOT", (1, 0)), ("CNOT", (4, 0))],
    "0+": [("H", (2,)), ("CNOT", (2, 1)), ("H", (3,)), ("CNOT", (3, 4))],
    "phi+": [("H", (3,)), ("CNOT", (3, 2)), ("H", (1,)), ("CNOT", (1, 4))],
}
_ENC_GATES = {
    "X1": [("X", (1,)), ("X", (3,))],
    "X2": [("X", (1,)), ("X", (2,))],
    "Z1": [("Z", (1,)), ("Z", (2,))],
    "Z2": [("Z", (1,)), ("Z", (3,))],
    "HHS": [("H", (1,)), ("H", (2,)), ("H", (3,)), ("H", (4,))],
    "CZ": [("S", (1,)), ("S", (2,)), ("S", (3,)), ("S", (4,)),
           ("Z", (2,)), ("Z", (3,))],
}


def logical_reference(circuit: LogicalCircuit) -> Circuit:
    """The circuit on two ideal qubits defining the target distribution.

    Identical to the bare expansion; it exists so callers can be explicit
    about which role (reference vs noisy run) a circuit plays.
    """
    return expand(circuit, "BARE")


def expand(circuit: LogicalCircuit, variant: str) -> Circuit:
    """Physical circuit for a logical circuit: 'BARE' (2 qubits) or 'ENCODED' (5)."""
    if variant == "BARE":
        prep, table, n = _BARE_PREP, _BARE_GATES, 2
    elif variant == "ENCODED":
        prep, table, n = _ENC_PREP, _ENC_GATES, 5
    else:
        raise FtError(f"variant must be BARE or ENCODED, got {variant!r}")
    gates = [Gate(nm, q) for nm, q in prep[circuit.initial]]
    for g in circuit.gates:
        gates += [Gate(nm, q) for nm, q in table[g]]
    return Circuit(n_qubits=n, gates=tuple(gates))


# ---------------------------------------------------------------------------
# postselection
# ---------------------------------------------------------------------------

def postselect(counts: dict) -> PostselectionReport:
    """Map five-bit outcome weights to the logical distribution.

    Keys are 5-character bit strings 'a dddd' without the space (ancilla q0
    first); shots with a = 1 or odd data parity are discarded.
    """
    kept = np.zeros(4)
    total = 0.0
    for key, weight in counts.items():
        if weight < 0:
            raise FtError(f"negative count for outcome {key!r}")
        if len(key) != 5 or any(c not in "01" for c in key):
            raise FtError(f"outcome key must be 5 bits, got {key!r}")
        total += weight
        if key[0] == "1":
            continue
        data = key[1:]
        if data.count("1") % 2 == 1:
            continue
        logical = CODEWORDS[data]
        kept[int(logical, 2)] += weight
    if total == 0:
        raise FtError("empty counts")
    kept_total = kept.sum()
    dist = kept / kept_total if kept_total > 0 else np.zeros(4)
    return PostselectionReport(kept_ratio=float(kept_total / total), logical_dist=dist)


# ---------------------------------------------------------------------------
# noisy execution
# ---------------------------------------------------------------------------

def run_noisy(circuit: Circuit, noise: NoiseModel) -> np.ndarray:
    """Exact outcome distribution of a circuit with per-gate depolarizing noise."""
    from .circuits import gate_matrix

    rho = ch.DensityMatrix.ground(circuit.n_qubits).rho
    px, py, pz = noise.dep_params()
    for gate in circuit.gates:
        rho = ch.apply_gate(rho, gate_matrix(gate), list(gate.qubits))
        if noise.depolarizing:
            for q in gate.qubits:
                rho = ch.apply_depolarizing(rho, q, px, py, pz)
    p = ch.measure_distribution(rho)
    if noise.meas_error:
        p = ch.apply_meas_error(p, noise.meas_error)
    return p


def _sample(p: np.ndarray, shots: int, rng) -> np.ndarray:
    counts = rng.multinomial(shots, p / p.sum())
    return counts / shots


@dataclass
class ProtocolRecord:
    id: int
    initial: str
    d_bare: float
    d_enc: float
    kept_ratio: float


def run_protocol(circuits, noise: NoiseModel, shots="exact", seed: int = 0,
                 initials=INITIALS) -> list:
    """Score bare vs encoded execution of each circuit against the ideal result.

    ``circuits`` is a list of (id, gate-name tuple); each is run for every
    requested initial state.  ``shots`` is 'exact' for exact distributions or
    an integer for multinomial sampling.
    """
    rng = np.random.default_rng(seed)
    records = []
    for cid, gates in sorted(circuits):
        for init in initials:
            lc = LogicalCircuit(id=cid, initial=init, gates=tuple(gates))
            ideal = np.abs(ideal_unitary(logical_reference(lc))[:, 0]) ** 2
            p_bare = run_noisy(expand(lc, "BARE"), noise)
            p_enc = run_noisy(expand(lc, "ENCODED"), noise)
            if shots != "exact":
                p_bare = _sample(p_bare, int(shots), rng)
                p_enc = _sample(p_enc, int(shots), rng)
            counts = {format(j, "05b"): p_enc[j] for j in range(32)}
            report = postselect(counts)
            records.append(ProtocolRecord(
                id=cid, initial=init,
                d_bare=statistical_distance(p_bare, ideal),
                d_enc=statistical_distance(report.logical_dist, ideal),
                kept_ratio=report.kept_ratio,
            ))
    return records


# ---------------------------------------------------------------------------
# circuit family file
# ---------------------------------------------------------------------------

def parse_circuit_family(text: str) -> list:
    """Lines '<id> <GATE> ... <GATE> |i>'; the trailing token is a placeholder."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[-1] != "|i>":
            raise FtError(f"circuit family line {lineno}: expected trailing '|i>' placeholder")
        try:
            cid = int(tok[0])
        except ValueError as exc:
            raise FtError(f"circuit family line {lineno}: bad id {tok[0]!r}") from exc
        gates = tuple(tok[1:-1])
        for g in gates:
            if g not in LOGICAL_GATES:
                raise FtError(f"circuit family line {lineno}: unknown gate {g!r}")
        out.append((cid, gates))
    return out


def format_circuit_family(circuits) -> str:
    return "\n".join(f"{cid} {' '.join(gates)} |i>" for cid, gates in circuits) + "\n"


def random_circuit_family(n_circuits: int, max_len: int = 10, seed: int = 1) -> list:
    """Seeded random gate sequences over the six-gate set, for tests and demos."""
    rng = np.random.default_rng(seed)
    out = []
    for cid in range(n_circuits):
        length = int(rng.integers(1, max_len + 1))
        gates = tuple(LOGICAL_GATES[int(k)] for k in rng.integers(0, len(LOGICAL_GATES), length))
        out.append((cid, gates))
    return out

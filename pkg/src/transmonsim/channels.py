"""Small ideal-qubit density-matrix simulator with standard error channels.

Used for the singlet-state characterization and as the noise engine of the
error-detection harness.  Qubit 0 is the most significant bit of the state
index, matching the circuit module's convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 10


class ChannelError(ValueError):
    pass


@dataclass
class DensityMatrix:
    n_qubits: int
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (2 ** self.n_qubits,) * 2:
            raise ChannelError("density matrix shape does not match qubit count")

    @classmethod
    def ground(cls, n_qubits: int) -> "DensityMatrix":
        if n_qubits > MAX_QUBITS:
            raise ChannelError(f"dense simulation limited to {MAX_QUBITS} qubits")
        rho = np.zeros((2 ** n_qubits,) * 2, dtype=complex)
        rho[0, 0] = 1.0
        return cls(n_qubits, rho)


def validate_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    if np.abs(rho - rho.conj().T).max() > 1e-12 * max(np.abs(rho).max(), 1.0):
        raise ChannelError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ChannelError("density matrix is not positive semidefinite")


def _apply_ops_tensor(rho: np.ndarray, ops, qubits, n: int) -> np.ndarray:
    """sum_a (E_a rho E_a^dag) with E_a acting on the given qubits."""
    k = len(qubits)
    rho_t = rho.reshape([2] * (2 * n))
    out = np.zeros_like(rho_t)
    axes = list(qubits)
    for e in ops:
        e_t = np.asarray(e, dtype=complex).reshape([2] * (2 * k))
        # contract E onto the ket indices, then E* onto the bra indices;
        # tensordot brings the fresh indices to the front, moveaxis restores them
        tmp = np.tensordot(e_t, rho_t, axes=(list(range(k, 2 * k)), axes))
        tmp = np.moveaxis(tmp, list(range(k)), axes)
        tmp = np.tensordot(e_t.conj(), tmp, axes=(list(range(k, 2 * k)), [n + q for q in axes]))
        tmp = np.moveaxis(tmp, list(range(k)), [n + q for q in axes])
        out += tmp
    return out.reshape(rho.shape)


def apply_kraus(rho: np.ndarray, ops, qubits, n: int) -> np.ndarray:
    return _apply_ops_tensor(rho, ops, list(qubits), n)


def apply_gate(rho: np.ndarray, u: np.ndarray, qubits, n: int | None = None) -> np.ndarray:
    """rho -> U rho U^dag with U embedded on ``qubits``."""
    n = int(round(math.log2(rho.shape[0]))) if n is None else n
    return apply_kraus(rho, [u], qubits, n)


def apply_depolarizing(rho: np.ndarray, q: int, p_x: float, p_y: float, p_z: float) -> np.ndarray:
    if min(p_x, p_y, p_z) < 0 or p_x + p_y + p_z >= 1.0:
        raise ChannelError("depolarizing probabilities must be >= 0 with p_x+p_y+p_z < 1")
    n = int(round(math.log2(rho.shape[0])))
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    ops = [math.sqrt(1.0 - p_x - p_y - p_z) * np.eye(2, dtype=complex),
           math.sqrt(p_x) * sx, math.sqrt(p_y) * sy, math.sqrt(p_z) * sz]
    return apply_kraus(rho, ops, [q], n)


def amp_damp_kraus(p: float, gamma: float):
    if not (0.0 <= p <= 1.0 and 0.0 <= gamma <= 1.0):
        raise ChannelError("amplitude damping requires p, gamma in [0, 1]")
    sp, sq = math.sqrt(p), math.sqrt(1.0 - p)
    sg, sgbar = math.sqrt(gamma), math.sqrt(1.0 - gamma)
    return [
        sp * np.array([[1, 0], [0, sgbar]], dtype=complex),
        sp * np.array([[0, sg], [0, 0]], dtype=complex),
        sq * np.array([[sgbar, 0], [0, 1]], dtype=complex),
        sq * np.array([[0, 0], [sg, 0]], dtype=complex),
    ]


def apply_amp_damp(rho: np.ndarray, q: int, p: float, gamma: float) -> np.ndarray:
    n = int(round(math.log2(rho.shape[0])))
    return apply_kraus(rho, amp_damp_kraus(p, gamma), [q], n)


def measure_distribution(rho: np.ndarray) -> np.ndarray:
    """Diagonal of rho normalized by its trace: p_J = <J|rho|J> / Tr rho."""
    diag = np.real(np.diag(rho))
    if diag.min() < -1e-10:
        raise ChannelError(f"negative population {diag.min():.2e}; state is not physical")
    diag = np.clip(diag, 0.0, None)
    tr = diag.sum()
    if tr <= 0:
        raise ChannelError("state has non-positive trace")
    return diag / tr


def apply_meas_error(p: np.ndarray, eps: float) -> np.ndarray:
    """Independent bit-flip readout errors: p'_J = sum_J' p_J' eps^d (1-eps)^(n-d)."""
    if not 0.0 <= eps <= 0.5:
        raise ChannelError("measurement error rate must lie in [0, 1/2]")
    p = np.asarray(p, dtype=float)
    n = int(round(math.log2(p.size)))
    flip = np.array([[1.0 - eps, eps], [eps, 1.0 - eps]])
    out = p.reshape([2] * n)
    for axis in range(n):
        out = np.tensordot(flip, out, axes=(1, axis))
        out = np.moveaxis(out, 0, axis)
    return out.reshape(-1)


# ---------------------------------------------------------------------------
# singlet characterization
# ---------------------------------------------------------------------------

@dataclass
class QubitChannels:
    """Per-qubit error channel parameters for the singlet experiment."""

    dep: dict = field(default_factory=dict)   # q -> (p_x, p_y, p_z)
    amp: dict = field(default_factory=dict)   # q -> (p, gamma)
    meas_eps: float = 0.0

    @classmethod
    def none(cls) -> "QubitChannels":
        return cls()


def parse_channel_file(text: str) -> QubitChannels:
    """Lines: 'dep <q> <px> <py> <pz>', 'amp <q> <p> <gamma>', 'meas <eps>'."""
    ch = QubitChannels()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "dep":
                ch.dep[int(tok[1])] = (float(tok[2]), float(tok[3]), float(tok[4]))
            elif tok[0] == "amp":
                ch.amp[int(tok[1])] = (float(tok[2]), float(tok[3]))
            elif tok[0] == "meas":
                ch.meas_eps = float(tok[1])
            else:
                raise ChannelError(f"channel file line {lineno}: unknown key {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ChannelError(f"channel file line {lineno}: {exc}") from exc
    return ch


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def singlet_experiment(theta0: float, theta1: float, channels: QubitChannels | None = None):
    """Singlet preparation and basis-rotated readout with optional error channels.

    The state (|01> - |10>)/sqrt(2) is prepared with X X, H, CNOT, and read
    out along tilted axes set by (theta0, theta1).  A depolarizing channel
    acts on both qubits after every pulse-like step; generalized amplitude
    damping acts once at the end; readout bit flips act on the distribution.
    Returns (E01, E0, E1, p) with p over outcomes (00, 01, 10, 11).
    """
    channels = channels or QubitChannels.none()

    def dep_step(rho):
        for q in (0, 1):
            px, py, pz = channels.dep.get(q, (0.0, 0.0, 0.0))
            if px or py or pz:
                rho = apply_depolarizing(rho, q, px, py, pz)
        return rho

    rho = DensityMatrix.ground(2).rho
    rho = apply_gate(rho, _X, [0])
    rho = apply_gate(rho, _X, [1])
    rho = dep_step(rho)
    rho = apply_gate(rho, _H, [0])
    rho = dep_step(rho)
    rho = apply_gate(rho, _CNOT, [0, 1])
    rho = dep_step(rho)
    rho = apply_gate(rho, _H, [0])
    rho = apply_gate(rho, _H, [1])
    rho = dep_step(rho)
    # U1 rotations are virtual: no pulse step, hence no channel insertion
    rho = apply_gate(rho, np.diag([1.0, np.exp(1j * theta0)]), [0])
    rho = apply_gate(rho, np.diag([1.0, np.exp(1j * theta1)]), [1])
    rho = apply_gate(rho, _H, [0])
    rho = apply_gate(rho, _H, [1])
    rho = dep_step(rho)
    for q in (0, 1):
        if q in channels.amp:
            rho = apply_amp_damp(rho, q, *channels.amp[q])
    p = measure_distribution(rho)
    if channels.meas_eps:
        p = apply_meas_error(p, channels.meas_eps)
    signs0 = np.array([1.0, 1.0, -1.0, -1.0])   # (-1)^j0 over (00, 01, 10, 11)
    signs1 = np.array([1.0, -1.0, 1.0, -1.0])
    e01 = float(np.dot(signs0 * signs1, p))
    e0 = float(np.dot(signs0, p))
    e1 = float(np.dot(signs1, p))
    return e01, e0, e1, p

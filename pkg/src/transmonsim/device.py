"""Device parameters and static operators for transmon-resonator networks.

A device is a set of transmons (charging energy EC, Josephson energy EJ),
resonators (frequency Omega, Fock-window offset) and sparse couplings.  All
configured energies are plain frequencies in GHz (the f = E/2pi numbers found
on device datasheets); the angular factor 2pi enters exactly once, when a
Hamiltonian or phase table is assembled.  With time measured in ns this makes
2*pi*f*t a phase in radians.

Each transmon is diagonalized numerically in the charge basis; the per-site
4x4 operator blocks (transmon energies, charge matrix elements, resonator
field matrix) and their eigendecompositions are precomputed here, once, for
use by the time-evolution kernels.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

TWOPI = 2.0 * math.pi

#: number of basis states kept per transmon / resonator in the packed basis
LEVELS = 4

#: default charge-basis truncation (states -50..50)
DEFAULT_N_CHARGE = 101

#: refuse to build state vectors larger than this (16 bytes per amplitude)
DEFAULT_MAX_DIM = 4 ** 13


class DeviceError(ValueError):
    """Invalid device parameters or device file."""


class ApproxKind(enum.Enum):
    """Reference Hamiltonian flavors for a single transmon-resonator pair."""

    FULL = "full"
    AO_INT_RWA = "ao_int_rwa"
    AO_INT_PT = "ao_int_pt"
    AO_FULL = "ao_full"
    TLA = "tla"


@dataclass(frozen=True)
class TransmonParams:
    """Transmon energies, stored as EC/2pi and EJ/2pi in GHz."""

    ec: float
    ej: float

    def __post_init__(self):
        if not (self.ec > 0 and self.ej > 0):
            raise DeviceError(f"transmon energies must be positive, got EC={self.ec}, EJ={self.ej}")
        if self.ej / self.ec < 1.0:
            warnings.warn(
                f"EJ/EC = {self.ej / self.ec:.3g} < 1: outside the transmon regime",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ResonatorParams:
    """Resonator frequency (Omega/2pi in GHz) and Fock-window offset."""

    omega: float
    fock_offset: int = 0

    def __post_init__(self):
        if not self.omega > 0:
            raise DeviceError(f"resonator frequency must be positive, got {self.omega}")
        if self.fock_offset < 0 or int(self.fock_offset) != self.fock_offset:
            raise DeviceError(f"fock_offset must be a non-negative integer, got {self.fock_offset}")


@dataclass(frozen=True)
class DeviceModel:
    """Static parameters of a transmon-resonator network.

    Coupling maps are sparse: absent keys mean zero coupling.  ``g`` couples
    resonator r to transmon i, ``lam`` couples resonators r < l, ``ecc``
    couples transmons i < j (all values GHz, 2pi-implicit).
    """

    transmons: tuple[TransmonParams, ...]
    resonators: tuple[ResonatorParams, ...]
    g: tuple[tuple[tuple[int, int], float], ...] = ()
    lam: tuple[tuple[tuple[int, int], float], ...] = ()
    ecc: tuple[tuple[tuple[int, int], float], ...] = ()
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        ntr, nres = len(self.transmons), len(self.resonators)
        for (r, i), _ in self.g:
            if not (0 <= r < nres and 0 <= i < ntr):
                raise DeviceError(f"G index ({r},{i}) out of range")
        for (r, l), _ in self.lam:
            if not (0 <= r < l < nres):
                raise DeviceError(f"lambda index ({r},{l}) out of range (need r < l)")
        for (i, j), _ in self.ecc:
            if not (0 <= i < j < ntr):
                raise DeviceError(f"ECC index ({i},{j}) out of range (need i < j)")
        if self.dim > self.max_dim:
            raise DeviceError(
                f"device dimension 4^{ntr + nres} = {self.dim} exceeds the memory budget "
                f"(cap {self.max_dim}, i.e. {16 * self.max_dim / 2**30:.1f} GiB of amplitudes)"
            )

    @property
    def ntr(self) -> int:
        return len(self.transmons)

    @property
    def nres(self) -> int:
        return len(self.resonators)

    @property
    def nsites(self) -> int:
        return self.ntr + self.nres

    @property
    def dim(self) -> int:
        return 4 ** self.nsites

    def g_map(self) -> dict:
        return dict(self.g)

    def lam_map(self) -> dict:
        return dict(self.lam)

    def ecc_map(self) -> dict:
        return dict(self.ecc)


def make_device(transmons, resonators, g=None, lam=None, ecc=None, max_dim=DEFAULT_MAX_DIM) -> DeviceModel:
    """Build a DeviceModel from lists/dicts (convenience over the frozen tuples)."""
    to_items = lambda m: tuple(sorted((tuple(k), float(v)) for k, v in (m or {}).items()))
    return DeviceModel(
        transmons=tuple(TransmonParams(*t) if not isinstance(t, TransmonParams) else t for t in transmons),
        resonators=tuple(
            ResonatorParams(*r) if not isinstance(r, ResonatorParams) else r for r in resonators
        ),
        g=to_items(g),
        lam=to_items(lam),
        ecc=to_items(ecc),
        max_dim=max_dim,
    )


# ---------------------------------------------------------------------------
# transmon diagonalization
# ---------------------------------------------------------------------------

def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component positive (first one on near-ties)."""
    mag = np.abs(vec)
    j = int(np.argmax(mag >= mag.max() * (1.0 - 1e-12)))
    return -vec if vec[j] < 0 else vec


def diagonalize_transmon(p: TransmonParams, n_charge: int = DEFAULT_N_CHARGE, n_levels: int = LEVELS):
    """Diagonalize 4 EC n^2 - EJ cos(phi) in the charge basis.

    Returns ``(energies, coeffs)`` where ``energies`` are the lowest
    ``n_levels`` eigenvalues in GHz, shifted so that energies[0] = 0, and
    ``coeffs[:, m]`` are the real charge-basis coefficients <n|m> over the
    charge states n = -(n_charge-1)/2 .. +(n_charge-1)/2.

    The eigenvector sign is fixed so the largest-magnitude coefficient of
    each column is positive.  That leaves a per-level sign gauge relative to
    other conventions in the literature; the gauge drops out of every
    computational-subspace quantity.
    """
    n_charge = int(n_charge)
    if n_charge % 2 != 1 or n_charge < 21:
        raise DeviceError(f"n_charge must be an odd integer >= 21, got {n_charge}")
    if n_levels > n_charge:
        raise DeviceError(f"n_charge={n_charge} too small for {n_levels} levels")
    half = (n_charge - 1) // 2
    nvals = np.arange(-half, half + 1, dtype=float)
    diag = 4.0 * p.ec * nvals ** 2
    off = -0.5 * p.ej * np.ones(n_charge - 1)
    try:
        energies, coeffs = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise DeviceError(f"charge-basis eigensolve failed: {exc}") from exc
    energies = energies - energies[0]
    coeffs = np.column_stack([_fix_sign(coeffs[:, m]) for m in range(n_levels)])
    return energies, coeffs


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 64):
    """Eigendecomposition of a small real symmetric matrix by cyclic Jacobi.

    Returns ``(eigenvalues, vectors)`` with eigenvalues ascending and
    ``vectors @ diag(w) @ vectors.T`` reconstructing ``a`` to machine
    precision.  Used for the per-site 4x4 operator blocks.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.abs(a).max() or 1.0
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                off = max(off, abs(apq))
                if abs(apq) <= tol * scale:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rp, rq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * rp - s * rq
                a[:, q] = s * rp + c * rq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                rp, rq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * rp - s * rq
                v[:, q] = s * rp + c * rq
        if off <= tol * scale:
            break
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    v = np.column_stack([_fix_sign(v[:, k]) for k in range(n)])
    return w, v


@dataclass(frozen=True)
class TransmonBasisData:
    """Per-transmon static data: energies (GHz, E0=0), charge 4x4 block, eigendecomposition."""

    energies: np.ndarray
    charge_elems: np.ndarray
    vn: np.ndarray
    lam_n: np.ndarray


@dataclass(frozen=True)
class ResonatorBasisData:
    """Per-resonator static data: a+adag 4x4 block on the Fock window and eigendecomposition."""

    field_elems: np.ndarray
    va: np.ndarray
    lam_a: np.ndarray


def transmon_basis_data(p: TransmonParams, n_charge: int = DEFAULT_N_CHARGE) -> TransmonBasisData:
    """Energies and charge-operator matrix elements of the lowest four levels."""
    energies, coeffs = diagonalize_transmon(p, n_charge=n_charge, n_levels=LEVELS)
    half = (n_charge - 1) // 2
    nvals = np.arange(-half, half + 1, dtype=float)
    elems = coeffs.T @ (nvals[:, None] * coeffs)
    elems = 0.5 * (elems + elems.T)
    # elements between same-parity levels vanish identically; zero the residue
    for m in range(LEVELS):
        for mp in range(LEVELS):
            if (m - mp) % 2 == 0:
                elems[m, mp] = 0.0
    lam_n, vn = jacobi_eigh(elems)
    return TransmonBasisData(energies=energies, charge_elems=elems, vn=vn, lam_n=lam_n)


def resonator_basis_data(p: ResonatorParams) -> ResonatorBasisData:
    """Field operator a+adag restricted to Fock states offset .. offset+3."""
    k0 = p.fock_offset
    sub = np.sqrt(np.arange(k0 + 1, k0 + LEVELS, dtype=float))
    elems = np.diag(sub, 1) + np.diag(sub, -1)
    lam_a, va = jacobi_eigh(elems)
    return ResonatorBasisData(field_elems=elems, va=va, lam_a=lam_a)


@dataclass(frozen=True)
class DeviceBasis:
    """Precomputed per-site basis data for a device."""

    device: DeviceModel
    transmons: tuple[TransmonBasisData, ...]
    resonators: tuple[ResonatorBasisData, ...]


_basis_cache: dict = {}


def device_basis(device: DeviceModel, n_charge: int = DEFAULT_N_CHARGE) -> DeviceBasis:
    """Compute (and memoize) all per-site basis data for ``device``."""
    key = (device, n_charge)
    hit = _basis_cache.get(key)
    if hit is None:
        hit = DeviceBasis(
            device=device,
            transmons=tuple(transmon_basis_data(t, n_charge) for t in device.transmons),
            resonators=tuple(resonator_basis_data(r) for r in device.resonators),
        )
        if len(_basis_cache) > 64:
            _basis_cache.clear()
        _basis_cache[key] = hit
    return hit


# ---------------------------------------------------------------------------
# diagonal part of the Hamiltonian
# ---------------------------------------------------------------------------

def h0_energies(device: DeviceModel, basis: DeviceBasis | None = None) -> np.ndarray:
    """Diagonal (drive- and coupling-free) energies, angular (rad/ns), indexed by packed KM.

    Entry KM carries sum_r k_r*Omega_r + sum_i E_{i,m_i} with k_r the actual
    photon number (window offset included).
    """
    basis = basis or device_basis(device)
    nsites = device.nsites
    dim = device.dim
    out = np.zeros(dim)
    idx = np.arange(dim)
    for s in range(nsites):
        bits = (idx >> (2 * (nsites - 1 - s))) & 3
        if s < device.nres:
            r = device.resonators[s]
            table = TWOPI * r.omega * (r.fock_offset + np.arange(LEVELS, dtype=float))
        else:
            table = TWOPI * basis.transmons[s - device.nres].energies
        out += table[bits]
    return out


def drive_scale(p: TransmonParams) -> float:
    """Energy scale b = 8 EC (EJ/32EC)^(1/4) converting dimensionless drive amplitudes, in GHz."""
    return 8.0 * p.ec * (p.ej / (32.0 * p.ec)) ** 0.25


def dense_hamiltonian(device: DeviceModel, basis: DeviceBasis | None = None,
                      ng=None, eps=None, max_sites: int = 8) -> np.ndarray:
    """Dense Hamiltonian (rad/ns) on the packed 4-level basis, for oracle use.

    ``ng``/``eps`` are per-transmon / per-resonator dimensionless drive values
    frozen at one instant (default zero).  Site order matches the KM packing:
    resonators first, each site contributing two bits, site 0 highest.
    """
    if device.nsites > max_sites:
        raise DeviceError(f"dense Hamiltonian limited to {max_sites} sites")
    basis = basis or device_basis(device)
    ng = np.zeros(device.ntr) if ng is None else np.asarray(ng, dtype=float)
    eps = np.zeros(device.nres) if eps is None else np.asarray(eps, dtype=float)
    dim = device.dim
    h = np.diag(h0_energies(device, basis)).astype(complex)

    def embed(op: np.ndarray, site: int) -> np.ndarray:
        full = np.array([[1.0]])
        for s in range(device.nsites):
            full = np.kron(full, op if s == site else np.eye(LEVELS))
        return full

    field = [embed(basis.resonators[r].field_elems, r) for r in range(device.nres)]
    charge = [embed(basis.transmons[i].charge_elems, device.nres + i) for i in range(device.ntr)]
    for i in range(device.ntr):
        if ng[i] != 0.0:
            h += (-8.0 * TWOPI * device.transmons[i].ec * ng[i]) * charge[i]
    for r in range(device.nres):
        if eps[r] != 0.0:
            h += (TWOPI * device.resonators[r].omega * eps[r]) * field[r]
    for (r, i), val in device.g:
        h += (TWOPI * val) * (charge[i] @ field[r])
    for (r, l), val in device.lam:
        h += (TWOPI * val) * (field[r] @ field[l])
    for (i, j), val in device.ecc:
        h += (TWOPI * val) * (charge[i] @ charge[j])
    assert h.shape == (dim, dim)
    return h


# ---------------------------------------------------------------------------
# reference Hamiltonians for a single transmon-resonator pair
# ---------------------------------------------------------------------------

def build_reference_hamiltonian(kind: ApproxKind, p: TransmonParams, r: ResonatorParams,
                                g_coupling: float, cutoff: int = 10,
                                n_charge: int = DEFAULT_N_CHARGE) -> np.ndarray:
    """Dense Hermitian reference Hamiltonians (rad/ns) for one transmon + one resonator.

    ``cutoff`` levels are kept per subsystem; index = k*n_m + m with the
    resonator index major.  FULL keeps the exact transmon spectrum and charge
    matrix elements; the AO/TLA variants implement the standard
    anharmonic-oscillator and two-level reductions, and AO_INT_PT builds the
    first-order dressed-state diagonal form.
    """
    kind = ApproxKind(kind)
    if cutoff < 2:
        raise DeviceError(f"cutoff must be >= 2 levels, got {cutoff}")
    omega_r = TWOPI * r.omega
    ao = (p.ej / (32.0 * p.ec)) ** 0.25
    g_ao = -ao * TWOPI * g_coupling  # rescaled exchange coupling, rad/ns
    wbar = TWOPI * (math.sqrt(8.0 * p.ec * p.ej) - p.ec)
    abar = -TWOPI * p.ec

    n_m = 2 if kind is ApproxKind.TLA else cutoff
    a_diag = np.sqrt(np.arange(1, cutoff, dtype=float))
    a_op = np.diag(a_diag, 1)  # resonator lowering operator
    field = a_op + a_op.T
    num = np.diag(np.arange(cutoff, dtype=float))

    if kind in (ApproxKind.FULL, ApproxKind.AO_INT_RWA, ApproxKind.AO_INT_PT):
        energies, coeffs = diagonalize_transmon(p, n_charge=max(n_charge, 2 * cutoff + 21), n_levels=cutoff)
        energies = TWOPI * energies
    if kind is ApproxKind.FULL:
        half = (max(n_charge, 2 * cutoff + 21) - 1) // 2
        nvals = np.arange(-half, half + 1, dtype=float)
        nmat = coeffs.T @ (nvals[:, None] * coeffs)
        nmat = 0.5 * (nmat + nmat.T)
        h = np.kron(np.eye(cutoff), np.diag(energies)) + omega_r * np.kron(num, np.eye(cutoff))
        h = h + TWOPI * g_coupling * np.kron(field, nmat)
        return h.astype(complex)

    b_op = np.diag(np.sqrt(np.arange(1, n_m, dtype=float)), 1)  # transmon ladder
    if kind is ApproxKind.AO_INT_RWA:
        h = np.kron(np.eye(cutoff), np.diag(energies)) + omega_r * np.kron(num, np.eye(cutoff))
        h = h + g_ao * (np.kron(a_op.T, b_op) + np.kron(a_op, b_op.T))
        return h.astype(complex)
    if kind is ApproxKind.AO_INT_PT:
        dim = cutoff * cutoff
        h = np.zeros((dim, dim))
        delta = np.empty(cutoff)
        for m in range(cutoff):
            em1 = energies[m + 1] if m + 1 < cutoff else 2 * energies[m] - energies[m - 1]
            delta[m] = em1 - energies[m] - omega_r
        for k in range(cutoff):
            for m in range(cutoff):
                vec = np.zeros(dim)
                vec[k * cutoff + m] = 1.0
                if k - 1 >= 0 and m + 1 < cutoff:  # a b^dag |km>
                    vec[(k - 1) * cutoff + (m + 1)] += (g_ao / delta[m]) * math.sqrt(k * (m + 1))
                if k + 1 < cutoff and m - 1 >= 0:  # a^dag b |km>
                    vec[(k + 1) * cutoff + (m - 1)] -= (g_ao / delta[m - 1]) * math.sqrt((k + 1) * m)
                vec /= np.linalg.norm(vec)
                h += (energies[m] + k * omega_r) * np.outer(vec, vec)
        return h.astype(complex)
    if kind is ApproxKind.AO_FULL:
        m = np.arange(cutoff, dtype=float)
        e_ao = wbar * m + 0.5 * abar * m * (m - 1.0)
        h = np.kron(np.eye(cutoff), np.diag(e_ao)) + omega_r * np.kron(num, np.eye(cutoff))
        h = h + g_ao * np.kron(field, b_op + b_op.T)
        return h.astype(complex)
    # TLA: two transmon levels, no RWA
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    e_tla = np.diag([0.0, wbar])
    h = np.kron(np.eye(cutoff), e_tla) + omega_r * np.kron(num, np.eye(2))
    h = h + g_ao * np.kron(field, sx)
    return h.astype(complex)


def dense_propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian ``h`` (rad/ns, t in ns) via eigendecomposition."""
    h = np.asarray(h)
    scale = max(np.abs(h).max(), 1.0)
    if np.abs(h - h.conj().T).max() > 1e-12 * scale:
        raise DeviceError("dense_propagator requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


# ---------------------------------------------------------------------------
# device file parsing
# ---------------------------------------------------------------------------

def parse_device(text: str, max_dim: int = DEFAULT_MAX_DIM) -> DeviceModel:
    """Parse the line-oriented device format.

    Keys: ``ntr``, ``nres``, ``transmon <i> EC <GHz> EJ <GHz>``,
    ``resonator <r> Omega <GHz> offset <int>``, ``G <r> <i> <GHz>``,
    ``lambda <r> <l> <GHz>``, ``ECC <i> <j> <GHz>``.  '#' starts a comment.
    Unknown keys are a hard error, reported with the line number.
    """
    ntr = nres = None
    transmons: dict[int, TransmonParams] = {}
    resonators: dict[int, ResonatorParams] = {}
    g, lam, ecc = {}, {}, {}

    def err(lineno, msg):
        raise DeviceError(f"device file line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        try:
            if key == "ntr":
                ntr = int(tok[1])
            elif key == "nres":
                nres = int(tok[1])
            elif key == "transmon":
                if len(tok) != 6 or tok[2] != "EC" or tok[4] != "EJ":
                    err(lineno, f"expected 'transmon <i> EC <GHz> EJ <GHz>', got {line!r}")
                i = int(tok[1])
                if i in transmons:
                    err(lineno, f"duplicate transmon {i}")
                transmons[i] = TransmonParams(ec=float(tok[3]), ej=float(tok[5]))
            elif key == "resonator":
                if len(tok) != 6 or tok[2] != "Omega" or tok[4] != "offset":
                    err(lineno, f"expected 'resonator <r> Omega <GHz> offset <int>', got {line!r}")
                r = int(tok[1])
                if r in resonators:
                    err(lineno, f"duplicate resonator {r}")
                resonators[r] = ResonatorParams(omega=float(tok[3]), fock_offset=int(tok[5]))
            elif key == "G":
                g[(int(tok[1]), int(tok[2]))] = float(tok[3])
            elif key == "lambda":
                lam[(int(tok[1]), int(tok[2]))] = float(tok[3])
            elif key == "ECC":
                ecc[(int(tok[1]), int(tok[2]))] = float(tok[3])
            else:
                err(lineno, f"unknown key {key!r}")
        except DeviceError:
            raise
        except (ValueError, IndexError) as exc:
            err(lineno, f"malformed entry {line!r} ({exc})")

    if ntr is None or nres is None:
        raise DeviceError("device file must declare 'ntr' and 'nres'")
    missing_t = sorted(set(range(ntr)) - set(transmons))
    missing_r = sorted(set(range(nres)) - set(resonators))
    if missing_t or missing_r:
        raise DeviceError(f"missing definitions: transmons {missing_t}, resonators {missing_r}")
    if set(transmons) - set(range(ntr)) or set(resonators) - set(range(nres)):
        raise DeviceError("site index outside declared ntr/nres range")
    return make_device(
        [transmons[i] for i in range(ntr)],
        [resonators[r] for r in range(nres)],
        g=g, lam=lam, ecc=ecc, max_dim=max_dim,
    )


def format_device(device: DeviceModel) -> str:
    """Serialize a DeviceModel to the device file format."""
    lines = [f"ntr {device.ntr}", f"nres {device.nres}"]
    for i, t in enumerate(device.transmons):
        lines.append(f"transmon {i} EC {t.ec!r} EJ {t.ej!r}")
    for r, res in enumerate(device.resonators):
        lines.append(f"resonator {r} Omega {res.omega!r} offset {res.fock_offset}")
    for (r, i), v in device.g:
        lines.append(f"G {r} {i} {v!r}")
    for (r, l), v in device.lam:
        lines.append(f"lambda {r} {l} {v!r}")
    for (i, j), v in device.ecc:
        lines.append(f"ECC {i} {j} {v!r}")
    return "\n".join(lines) + "\n"


def load_device(path, max_dim: int = DEFAULT_MAX_DIM) -> DeviceModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_device(fh.read(), max_dim=max_dim)

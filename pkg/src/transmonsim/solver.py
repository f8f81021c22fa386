"""Time-dependent Schroedinger solver on the packed 4-level basis.

The state of NTr transmons and NRes resonators lives on 4^(NTr+NRes) complex
amplitudes indexed by an integer KM: two bits per site, resonator bit pairs
in the high group (resonator 0 highest), transmon bit pairs in the low group.
One time step applies the second-order product formula

    psi <- exp(-i tau H0/2) V exp(-i tau Lambda(t+tau/2)) V^dag exp(-i tau H0/2) psi

where H0 collects the bare transmon/resonator energies, V is the tensor
product of the per-site 4x4 eigenvector blocks and Lambda is the diagonal of
the coupling/drive part in that eigenbasis.  Drives are evaluated at the
interval midpoint.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels
from .device import LEVELS, TWOPI, DeviceBasis, DeviceModel, device_basis

_BINARY_MAGIC = b"TRSMSTAT"
_BINARY_VERSION = 1


class SolverError(ValueError):
    pass


def _set_threads(n: int) -> None:
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


class LoopStrategy(enum.IntEnum):
    """Index-enumeration strategy for the per-site 4x4 transforms."""

    BRANCHED_FULL_LOOP = 0
    BITMASK_REDUCED_LOOP = 1
    NESTED_LOOPS = 2


@dataclass
class StateVector:
    """Packed-basis state: 4^(ntr+nres) complex amplitudes plus a clock."""

    ntr: int
    nres: int
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (4 ** (self.ntr + self.nres),):
            raise SolverError(
                f"state length {self.coeffs.shape} does not match 4^{self.ntr + self.nres}"
            )

    @property
    def nsites(self) -> int:
        return self.ntr + self.nres

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def copy(self) -> "StateVector":
        return StateVector(self.ntr, self.nres, self.coeffs.copy(), self.t)

    @classmethod
    def ground(cls, ntr: int, nres: int) -> "StateVector":
        c = np.zeros(4 ** (ntr + nres), dtype=np.complex128)
        c[0] = 1.0
        return cls(ntr, nres, c)

    @classmethod
    def basis_state(cls, ks, ms) -> "StateVector":
        st = cls.ground(len(ms), len(ks))
        st.coeffs[0] = 0.0
        st.coeffs[pack_index(ks, ms)] = 1.0
        return st

    @classmethod
    def product(cls, res_amps, tr_amps) -> "StateVector":
        """Product state from per-site 4-amplitude vectors (resonators first)."""
        vec = np.array([1.0], dtype=np.complex128)
        for a in list(res_amps) + list(tr_amps):
            a = np.asarray(a, dtype=np.complex128)
            if a.shape != (LEVELS,):
                raise SolverError("per-site amplitudes must have length 4")
            vec = np.kron(vec, a)
        return cls(len(tr_amps), len(res_amps), vec)


@dataclass
class SolverConfig:
    tau: float = 1e-3
    strategy: LoopStrategy = LoopStrategy.NESTED_LOOPS
    snapshot_times: tuple = ()
    thread_count: int = 1

    def __post_init__(self):
        if self.tau <= 0:
            raise SolverError(f"tau must be positive, got {self.tau}")


@dataclass
class Trajectory:
    """Snapshots of an evolution: times (ns) and one state row per time."""

    ntr: int
    nres: int
    times: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> StateVector:
        return StateVector(self.ntr, self.nres, self.states[i].copy(), float(self.times[i]))


# ---------------------------------------------------------------------------
# index packing
# ---------------------------------------------------------------------------

def pack_index(ks, ms) -> int:
    """Pack per-site levels into the KM integer (resonators high, site 0 highest)."""
    ks, ms = list(ks), list(ms)
    if len(ks) + len(ms) > 31:
        raise SolverError("at most 31 sites fit the packed 64-bit index")
    km = 0
    for v in ks + ms:
        if not 0 <= v <= 3:
            raise SolverError(f"site level {v} outside 0..3")
        km = (km << 2) | int(v)
    return km


def unpack_index(km: int, nres: int, ntr: int):
    """Inverse of pack_index: KM integer -> (ks, ms)."""
    levels = [(km >> (2 * s)) & 3 for s in range(nres + ntr)][::-1]
    return levels[:nres], levels[nres:]


def site_shift(nsites: int, site: int) -> int:
    """Bit position of a site's two index bits (site 0 = highest pair)."""
    return 2 * (nsites - 1 - site)


# ---------------------------------------------------------------------------
# elementary updates
# ---------------------------------------------------------------------------

def apply_diagonal(state: StateVector, energies: np.ndarray, dt: float) -> StateVector:
    """In place: psi_KM *= exp(-i * energies[KM] * dt)."""
    if energies.shape != state.coeffs.shape:
        raise SolverError("energies length must match the state dimension")
    state.coeffs *= np.exp(-1j * energies * dt)
    return state


_SITE_KERNELS = {
    (0, False): _kernels.site_transform_s0,
    (1, False): _kernels.site_transform_s1,
    (2, False): _kernels.site_transform_s2,
    (0, True): _kernels.site_transform_s0_mt,
    (1, True): _kernels.site_transform_s1_mt,
    (2, True): _kernels.site_transform_s2_mt,
}


def apply_site_transform(state: StateVector, site: int, u4: np.ndarray,
                         strategy=LoopStrategy.NESTED_LOOPS, threads: int = 1) -> StateVector:
    """In place 4x4 transform of one site's amplitudes on every index group."""
    if not 0 <= site < state.nsites:
        raise SolverError(f"site {site} out of range for {state.nsites} sites")
    u4 = np.ascontiguousarray(u4, dtype=np.complex128)
    if u4.shape != (4, 4) or np.abs(u4 @ u4.conj().T - np.eye(4)).max() > 1e-9:
        raise SolverError("u4 must be a unitary 4x4 matrix")
    strategy = int(strategy)
    if strategy not in (0, 1, 2):
        raise SolverError(f"unknown strategy {strategy}")
    kern = _SITE_KERNELS[(strategy, threads > 1)]
    if threads > 1:
        _set_threads(threads)
    kern(state.coeffs, u4, site_shift(state.nsites, site))
    return state


# ---------------------------------------------------------------------------
# device precomputation
# ---------------------------------------------------------------------------

@dataclass
class _EvolutionData:
    """Per-device static arrays consumed by the compiled step kernel."""

    energies: np.ndarray          # angular H0 diagonal
    lam_static: np.ndarray        # static coupling part of Lambda (angular)
    v_site: np.ndarray            # (nsites, 4, 4) complex eigenvector blocks
    vdag_site: np.ndarray
    shifts: np.ndarray            # (nsites,) bit positions
    lam_site: np.ndarray          # (nsites, 4) eigenvalue tables
    drive_coef_scale: np.ndarray  # per site: eps -> Omega_r, ng -> -8 EC_i (angular)
    site_is_res: np.ndarray


_evo_cache: dict = {}


def _evolution_data(device: DeviceModel, basis: DeviceBasis | None = None) -> _EvolutionData:
    key = device
    hit = _evo_cache.get(key)
    if hit is not None:
        return hit
    basis = basis or device_basis(device)
    nsites, nres = device.nsites, device.nres
    shifts = np.array([site_shift(nsites, s) for s in range(nsites)], dtype=np.int64)
    v_site = np.zeros((nsites, 4, 4), dtype=np.complex128)
    lam_site = np.zeros((nsites, 4))
    scale = np.zeros(nsites)
    site_is_res = np.zeros(nsites, dtype=np.bool_)
    for s in range(nsites):
        if s < nres:
            bd = basis.resonators[s]
            v_site[s] = bd.va
            lam_site[s] = bd.lam_a
            scale[s] = TWOPI * device.resonators[s].omega
            site_is_res[s] = True
        else:
            bd = basis.transmons[s - nres]
            v_site[s] = bd.vn
            lam_site[s] = bd.lam_n
            scale[s] = -8.0 * TWOPI * device.transmons[s - nres].ec
    vdag_site = np.ascontiguousarray(np.conj(np.transpose(v_site, (0, 2, 1))))

    dim = device.dim
    lam_static = np.zeros(dim)
    chunk = 1 << 20
    pairs = (
        [((r, device.nres + i), TWOPI * v) for (r, i), v in device.g]
        + [((r, l), TWOPI * v) for (r, l), v in device.lam]
        + [((device.nres + i, device.nres + j), TWOPI * v) for (i, j), v in device.ecc]
    )
    for lo in range(0, dim, chunk):
        idx = np.arange(lo, min(lo + chunk, dim))
        acc = np.zeros(idx.size)
        for (sa, sb), v in pairs:
            acc += v * lam_site[sa][(idx >> shifts[sa]) & 3] * lam_site[sb][(idx >> shifts[sb]) & 3]
        lam_static[lo:lo + idx.size] = acc

    data = _EvolutionData(
        energies=np.ascontiguousarray(h0_energies_cached(device, basis)),
        lam_static=lam_static,
        v_site=v_site,
        vdag_site=vdag_site,
        shifts=shifts,
        lam_site=lam_site,
        drive_coef_scale=scale,
        site_is_res=site_is_res,
    )
    if len(_evo_cache) > 16:
        _evo_cache.clear()
    _evo_cache[key] = data
    return data


def h0_energies_cached(device: DeviceModel, basis: DeviceBasis | None = None) -> np.ndarray:
    from .device import h0_energies

    return h0_energies(device, basis)


def build_lambda(device: DeviceModel, basis: DeviceBasis | None, ng=None, eps=None) -> np.ndarray:
    """Diagonal of the coupling/drive part in the V eigenbasis, angular (rad/ns)."""
    data = _evolution_data(device, basis)
    out = data.lam_static.copy()
    idx = np.arange(device.dim)
    ng = np.zeros(device.ntr) if ng is None else np.asarray(ng, dtype=float)
    eps = np.zeros(device.nres) if eps is None else np.asarray(eps, dtype=float)
    for s in range(device.nsites):
        drive = eps[s] if data.site_is_res[s] else ng[s - device.nres]
        if drive != 0.0:
            out += data.drive_coef_scale[s] * drive * data.lam_site[s][(idx >> data.shifts[s]) & 3]
    return out


# ---------------------------------------------------------------------------
# schedules in kernel form
# ---------------------------------------------------------------------------

_EMPTY_SEGS = tuple(np.zeros(0, dtype=d) for d in
                    (np.float64, np.float64, np.bool_, np.int64, np.int8,
                     np.float64, np.float64, np.float64, np.float64, np.float64))


def _segment_arrays(schedule):
    """Lower a PulseSchedule (or None) to the flat arrays the kernel consumes."""
    if schedule is None or not getattr(schedule, "segments", ()):
        return _EMPTY_SEGS
    from .pulses import Shape

    kind_code = {Shape.GAUSS: 0, Shape.GAUSSDOT: 1, Shape.GAUSSFLAT: 2, Shape.ZERO: 3}
    segs = schedule.segments
    n = len(segs)
    t0 = np.zeros(n)
    t1 = np.zeros(n)
    res = np.zeros(n, dtype=np.bool_)
    site = np.zeros(n, dtype=np.int64)
    kind = np.zeros(n, dtype=np.int8)
    f = np.zeros(n)
    phase = np.zeros(n)
    amp = np.zeros(n)
    env_t = np.zeros(n)
    extra = np.zeros(n)
    for j, s in enumerate(segs):
        t0[j], t1[j] = s.t0, s.t1
        res[j] = s.target_kind == "r"
        site[j] = s.target_index
        kind[j] = kind_code[s.shape]
        f[j] = s.carrier_f
        phase[j] = s.phase
        amp[j] = s.amp
        env_t[j] = s.env_t
        extra[j] = s.extra
    return t0, t1, res, site, kind, f, phase, amp, env_t, extra


# ---------------------------------------------------------------------------
# stepping and evolution
# ---------------------------------------------------------------------------

def _run_steps(state: StateVector, device: DeviceModel, schedule, t_start: float,
               tau: float, n_steps: int, strategy, threads: int,
               snap_steps: np.ndarray) -> np.ndarray:
    data = _evolution_data(device)
    phase_h0_half = np.exp(-0.5j * tau * data.energies)
    phase_w_static = np.exp(-1j * tau * data.lam_static)
    segs = _segment_arrays(schedule)
    out = np.zeros((snap_steps.size, state.dim), dtype=np.complex128)
    kern = _kernels.evolve_kernel
    if threads > 1:
        _set_threads(threads)
        kern = _kernels.evolve_kernel_mt
    kern(state.coeffs, t_start, tau, n_steps, int(strategy),
         phase_h0_half, phase_w_static, data.lam_static,
         data.v_site, data.vdag_site, data.shifts, data.lam_site,
         data.drive_coef_scale, data.site_is_res, *segs, snap_steps, out)
    state.t = t_start + n_steps * tau
    return out


def step(state: StateVector, device: DeviceModel, basis, schedule, t0: float,
         tau: float, strategy=LoopStrategy.NESTED_LOOPS, threads: int = 1) -> StateVector:
    """One product-formula step from t0 to t0+tau (drives read at t0+tau/2)."""
    _run_steps(state, device, schedule, t0, tau, 1, strategy, threads,
               np.zeros(0, dtype=np.int64))
    return state


def evolve(state: StateVector, device: DeviceModel, schedule,
           config: SolverConfig) -> Trajectory:
    """Evolve from the state's clock to the last snapshot time.

    Snapshot times must lie on the tau grid (within 1e-9 ns) at or after the
    state's current time.  The returned trajectory rows are copies, safe to
    keep across further evolution.
    """
    times = np.asarray(sorted(config.snapshot_times), dtype=float)
    if times.size == 0:
        raise SolverError("at least one snapshot time is required")
    if times[0] < state.t - 1e-9:
        raise SolverError("snapshot times must not precede the state clock")
    steps_f = (times - state.t) / config.tau
    snap_steps = np.round(steps_f).astype(np.int64)
    if np.abs(steps_f - snap_steps).max() > 1e-9 / config.tau + 1e-9:
        raise SolverError("snapshot times must be multiples of tau")
    if np.any(np.diff(snap_steps) == 0):
        raise SolverError("duplicate snapshot times")
    n_steps = int(snap_steps[-1])
    out = _run_steps(state, device, schedule, state.t, config.tau, n_steps,
                     config.strategy, config.thread_count, snap_steps)
    return Trajectory(state.ntr, state.nres, times, out)


# ---------------------------------------------------------------------------
# frames and projections
# ---------------------------------------------------------------------------

def to_rotating_frame(state: StateVector, freqs, t: float | None = None) -> StateVector:
    """In place: psi *= exp(+i t sum_i omega_i m_i), freqs per transmon in GHz."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.shape != (state.ntr,):
        raise SolverError("freqs must have one entry per transmon")
    t = state.t if t is None else t
    idx = np.arange(state.dim)
    phase = np.zeros(state.dim)
    for i in range(state.ntr):
        m = (idx >> site_shift(state.nsites, state.nres + i)) & 3
        phase = phase + TWOPI * freqs[i] * m
    state.coeffs *= np.exp(1j * t * phase)
    return state


def computational_indices(ntr: int, nres: int) -> np.ndarray:
    """Packed indices with every resonator at its window base and every m in {0,1}."""
    nsites = ntr + nres
    out = np.zeros(2 ** ntr, dtype=np.int64)
    for j in range(2 ** ntr):
        km = 0
        for i in range(ntr):
            bit = (j >> (ntr - 1 - i)) & 1
            km |= bit << site_shift(nsites, nres + i)
        out[j] = km
    return out


def project_computational(state: StateVector):
    """Keep the computational amplitudes; return (2^ntr vector, leaked weight)."""
    kept = state.coeffs[computational_indices(state.ntr, state.nres)].copy()
    leakage = float(np.linalg.norm(state.coeffs) ** 2 - np.linalg.norm(kept) ** 2)
    return kept, leakage


# ---------------------------------------------------------------------------
# state I/O
# ---------------------------------------------------------------------------

def save_state_text(state: StateVector, path) -> None:
    """Write one 'KM abs arg' line per amplitude."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# ntr {state.ntr} nres {state.nres} t {float(state.t)!r}\n")
        for km, c in enumerate(state.coeffs):
            fh.write(f"{km} {float(abs(c))!r} {float(np.angle(c))!r}\n")


def load_state_text(path) -> StateVector:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        try:
            ntr, nres, t = int(header[2]), int(header[4]), float(header[6])
        except (IndexError, ValueError) as exc:
            raise SolverError(f"bad state file header: {exc}") from exc
        dim = 4 ** (ntr + nres)
        coeffs = np.zeros(dim, dtype=np.complex128)
        count = 0
        for line in fh:
            if not line.strip():
                continue
            km_s, mod_s, arg_s = line.split()
            coeffs[int(km_s)] = float(mod_s) * np.exp(1j * float(arg_s))
            count += 1
        if count != dim:
            raise SolverError(f"state file truncated: {count} of {dim} amplitudes")
    return StateVector(ntr, nres, coeffs, t)


def save_state_binary(state: StateVector, path) -> None:
    """Fixed 32-byte header (magic, version, ntr, nres, pad, t) + little-endian f64 pairs."""
    header = struct.pack("<8sIIIId", _BINARY_MAGIC, _BINARY_VERSION, state.ntr, state.nres, 0, state.t)
    buf = np.empty(2 * state.dim)
    buf[0::2] = state.coeffs.real
    buf[1::2] = state.coeffs.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(buf.astype("<f8").tobytes())


def load_state_binary(path, expect: tuple | None = None) -> StateVector:
    with open(path, "rb") as fh:
        header = fh.read(32)
        if len(header) < 32:
            raise SolverError("state file truncated: incomplete header")
        magic, version, ntr, nres, _pad, t = struct.unpack("<8sIIIId", header)
        if magic != _BINARY_MAGIC or version != _BINARY_VERSION:
            raise SolverError("not a state file (bad magic/version)")
        if expect is not None and (ntr, nres) != tuple(expect):
            raise SolverError(f"state file holds ({ntr},{nres}) sites, expected {tuple(expect)}")
        dim = 4 ** (ntr + nres)
        raw = fh.read(16 * dim)
        if len(raw) != 16 * dim:
            raise SolverError(f"state file truncated: {len(raw)} of {16 * dim} payload bytes")
    buf = np.frombuffer(raw, dtype="<f8")
    coeffs = buf[0::2] + 1j * buf[1::2]
    return StateVector(ntr, nres, coeffs.copy(), t)

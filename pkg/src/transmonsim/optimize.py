"""Gate extraction, the Frobenius distance objective, and Nelder-Mead search.

The transformation a pulse realizes on the computational subspace is read
off column by column: simulate each computational basis initial state, move
to the rotating frame, and project.  The resulting matrix M is compared to
the target U through ||M - zU||_F^2 with the global phase z optimized out,
and the pulse parameters are tuned with a downhill-simplex search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device import DeviceModel, device_basis
from .evaluator import bloch_trajectory, fit_qubit_frequency
from .pulses import (CrParams, GdParams, PulseLibrary, PulseSchedule, PulseSegment, Shape,
                     VZRegister, cnot_duration, cr2_initial_time, cr_theory, emit_cnot, emit_gd,
                     gauss_envelope)
from .solver import (LoopStrategy, SolverConfig, StateVector, computational_indices, evolve,
                     site_shift, to_rotating_frame)

TWOPI = 2.0 * math.pi


class OptimizeError(ValueError):
    pass


@dataclass
class GateMatrix:
    """Projected subspace transformation and the weight that escaped it."""

    m: np.ndarray
    leakage: float


def _subspace_indices(device: DeviceModel, subspace_qubits) -> np.ndarray:
    """Packed indices of the basis states spanned by the chosen qubits (others ground)."""
    nsites = device.nsites
    qubits = list(subspace_qubits)
    out = np.zeros(2 ** len(qubits), dtype=np.int64)
    for j in range(2 ** len(qubits)):
        km = 0
        for pos, q in enumerate(qubits):
            bit = (j >> (len(qubits) - 1 - pos)) & 1
            km |= bit << site_shift(nsites, device.nres + q)
        out[j] = km
    return out


def extract_gate_matrix(device: DeviceModel, schedule, subspace_qubits, frame_freqs,
                        tau: float = 1e-3, strategy=LoopStrategy.NESTED_LOOPS,
                        threads: int = 1) -> GateMatrix:
    """Columns of the rotating-frame subspace map realized by ``schedule``.

    Initial states run over the computational basis of ``subspace_qubits``
    (all other transmons in their ground state, resonators at the window
    base).  ``frame_freqs`` holds one GHz frequency per transmon.
    """
    qubits = list(subspace_qubits)
    if len(qubits) not in (1, 2) and len(qubits) != device.ntr:
        raise OptimizeError("subspace must cover 1 or 2 qubits (or all of them)")
    idx = _subspace_indices(device, qubits)
    duration = schedule.duration if schedule is not None else 0.0
    n_steps = int(round(duration / tau))
    if abs(n_steps * tau - duration) > 1e-9:
        raise OptimizeError(f"schedule duration {duration} is not a multiple of tau={tau}")
    dim = 2 ** len(qubits)
    m = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        psi = StateVector.ground(device.ntr, device.nres)
        psi.coeffs[0] = 0.0
        psi.coeffs[idx[j]] = 1.0
        if n_steps:
            cfg = SolverConfig(tau=tau, strategy=strategy,
                               snapshot_times=(n_steps * tau,), thread_count=threads)
            traj = evolve(psi, device, schedule, cfg)
            psi = traj.state(len(traj) - 1)
        to_rotating_frame(psi, frame_freqs, t=duration)
        m[:, j] = psi.coeffs[idx]
    leakage = 1.0 - float(np.mean(np.sum(np.abs(m) ** 2, axis=0)))
    return GateMatrix(m=m, leakage=leakage)


def distance(m: np.ndarray, u: np.ndarray):
    """(||M - zU||_F^2, z) with the global phase z chosen to minimize the norm."""
    m = np.asarray(m, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if m.shape != u.shape:
        raise OptimizeError("matrices must have the same shape")
    tr = np.trace(m @ u.conj().T)
    if tr == 0:
        z = 1.0 + 0.0j
    else:
        z = np.sqrt(tr / np.conj(tr))
        if np.linalg.norm(m - z * u) > np.linalg.norm(m + z * u):
            z = -z
    delta = float(np.linalg.norm(m - z * u) ** 2)
    return delta, z


# ---------------------------------------------------------------------------
# Nelder-Mead
# ---------------------------------------------------------------------------

@dataclass
class NmConfig:
    scales: np.ndarray
    epsilon: float = 1e-4
    max_evals: int = 400
    restart_shrink: float = 10.0

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=float)
        if np.any(self.scales <= 0) or self.epsilon <= 0:
            raise OptimizeError("scales and epsilon must be positive")


@dataclass
class NmResult:
    x_best: np.ndarray
    f_best: float
    trace: list          # (op, f_best, f_max, delta) per iteration
    evals: list          # (eval#, x, f) per objective call
    n_evals: int
    delta: float


def nelder_mead(f, x_init, cfg: NmConfig) -> NmResult:
    """Downhill-simplex minimization with the reflect/expand/contract/shrink ladder.

    The simplex starts at ``x_init`` plus one point per parameter displaced
    by its characteristic scale; iteration stops when the fractional spread
    of the simplex values drops below ``cfg.epsilon`` or the evaluation
    budget runs out.
    """
    x_init = np.asarray(x_init, dtype=float)
    n = x_init.size
    if cfg.scales.size != n:
        raise OptimizeError("one scale per parameter is required")
    evals: list = []
    trace: list = []

    def call(x):
        val = float(f(x))
        if not math.isfinite(val):
            raise OptimizeError(f"objective returned a non-finite value at {x}")
        evals.append((len(evals), x.copy(), val))
        return val

    simplex = [x_init.copy()]
    for k in range(n):
        x = x_init.copy()
        x[k] += cfg.scales[k]
        simplex.append(x)
    values = [call(x) for x in simplex]

    def spread():
        lo, hi = min(values), max(values)
        return 2.0 * abs(hi - lo) / (abs(hi) + abs(lo) + 1e-10)

    delta = spread()
    while delta >= cfg.epsilon and len(evals) < cfg.max_evals:
        i_hi = int(np.argmax(values))
        i_lo = int(np.argmin(values))
        others = [v for j, v in enumerate(values) if j != i_hi]
        centroid = np.mean([x for j, x in enumerate(simplex) if j != i_hi], axis=0)
        x_refl = centroid + (centroid - simplex[i_hi])
        f_refl = call(x_refl)
        if f_refl < values[i_lo]:
            x_exp = centroid + 2.0 * (centroid - simplex[i_hi])
            f_exp = call(x_exp)
            if f_exp < f_refl:
                simplex[i_hi], values[i_hi] = x_exp, f_exp
            else:
                simplex[i_hi], values[i_hi] = x_refl, f_refl
            op = "EXPAND"
        elif f_refl <= max(others):
            simplex[i_hi], values[i_hi] = x_refl, f_refl
            op = "REFLECT"
        else:
            x_con = centroid + 0.5 * (simplex[i_hi] - centroid)
            f_con = call(x_con)
            if f_con < values[i_hi]:
                simplex[i_hi], values[i_hi] = x_con, f_con
                op = "CONTRACT"
            else:
                x_min = simplex[i_lo]
                for j in range(len(simplex)):
                    if j == i_lo:
                        continue
                    simplex[j] = x_min + 0.5 * (simplex[j] - x_min)
                    values[j] = call(simplex[j])
                op = "SHRINK"
        delta = spread()
        trace.append((op, min(values), max(values), delta))
    i_lo = int(np.argmin(values))
    return NmResult(x_best=simplex[i_lo].copy(), f_best=values[i_lo], trace=trace,
                    evals=evals, n_evals=len(evals), delta=delta)


# ---------------------------------------------------------------------------
# gate optimization
# ---------------------------------------------------------------------------

def rx_matrix(theta):
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def gate_target(gate_kind: str) -> np.ndarray:
    if gate_kind.startswith("xpih-"):
        return rx_matrix(math.pi / 2)
    if gate_kind.startswith("xpi-"):
        return rx_matrix(math.pi)
    if gate_kind.startswith("cnot-"):
        from .circuits import CNOT_MATRIX

        return CNOT_MATRIX.copy()
    raise OptimizeError(f"unknown gate kind {gate_kind!r}")


def schedule_for_gate(gate_kind: str, library: PulseLibrary):
    """Single-gate schedule at t=0, plus the virtual-Z register it leaves behind.

    CNOT schemes finish with virtual Z corrections; they cost no time but are
    part of the gate, so standalone characterization must fold them into the
    extracted matrix.
    """
    sched = PulseSchedule()
    parts = gate_kind.split("-")
    if parts[0] in ("xpih", "xpi"):
        q = int(parts[1])
        table = library.gd_half if parts[0] == "xpih" else library.gd_pi
        if q not in table:
            raise OptimizeError(f"pulse library has no {gate_kind} entry")
        vz = VZRegister(q + 1)
        sched.extend(emit_gd(q, "HALF" if parts[0] == "xpih" else "PI", vz, table[q], 0.0))
    elif parts[0] == "cnot":
        c, t = int(parts[1]), int(parts[2])
        params = library.cnot.get((c, t))
        if params is None:
            raise OptimizeError(f"pulse library has no {gate_kind} entry")
        vz = VZRegister(max(c, t) + 1)
        sched.extend(emit_cnot(c, t, params.scheme, vz, params, library, 0.0))
    else:
        raise OptimizeError(f"unknown gate kind {gate_kind!r}")
    return sched.sorted(), vz


def _vz_correction(vz: VZRegister, subspace_qubits) -> np.ndarray:
    """Pending virtual Z rotations as a matrix on the subspace (theta_q = -gamma_q)."""
    out = np.array([[1.0]], dtype=complex)
    for q in subspace_qubits:
        theta = -vz.gamma[q] if q < len(vz.gamma) else 0.0
        out = np.kron(out, np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]))
    return out


def realize_gate(device: DeviceModel, gate_kind: str, library: PulseLibrary,
                 frame_freqs, subspace_qubits=None, tau: float = 1e-3,
                 threads: int = 1) -> GateMatrix:
    """Extract the subspace matrix of one gate, trailing VZ corrections included."""
    parts = gate_kind.split("-")
    if subspace_qubits is None:
        subspace_qubits = [int(p) for p in parts[1:3] if p != ""]
    sched, vz = schedule_for_gate(gate_kind, library)
    gm = extract_gate_matrix(device, sched, subspace_qubits, frame_freqs,
                             tau=tau, threads=threads)
    corr = _vz_correction(vz, subspace_qubits)
    return GateMatrix(m=corr @ gm.m, leakage=gm.leakage)


@dataclass
class OptResult:
    gate_kind: str
    library: PulseLibrary
    delta: float
    z: float
    matrix: GateMatrix
    nm: NmResult
    frame_freqs: np.ndarray


def _pack_gd(p: GdParams, withf: bool):
    x = [p.amp, p.beta] + ([p.f] if withf else [])
    scales = [0.02 * abs(p.amp) + 1e-6, 0.02, 0.0002][: len(x)]
    return np.array(x), np.array(scales)


def _unpack_gd(p: GdParams, x, withf: bool) -> GdParams:
    return replace(p, amp=float(x[0]), beta=float(x[1]), f=float(x[2]) if withf else p.f)


def optimize_gate(device: DeviceModel, gate_kind: str, library: PulseLibrary,
                  frame_freqs, withf: bool = False, full_subspace: bool = False,
                  tau: float = 1e-3, epsilon: float = 1e-4, max_evals: int = 400,
                  threads: int = 1) -> OptResult:
    """Tune one gate's pulse parameters to minimize the subspace distance.

    GD gates vary (amplitude, DRAG coefficient[, frequency]); CR2/CR4 CNOT
    gates vary (flat time, amplitude[, frequency]); CR1 varies the two
    amplitudes and the four phases.  Initial values are taken from the
    library entry, which is normally seeded from theory.
    """
    parts = gate_kind.split("-")
    target_1q = gate_target(gate_kind)
    if parts[0] in ("xpih", "xpi"):
        qubits = [int(parts[1])]
    else:
        qubits = [int(parts[1]), int(parts[2])]
    if full_subspace:
        sub = list(range(device.ntr))
        target = np.array([[1.0]])
        for q in sub:
            target = np.kron(target, target_1q if [q] == qubits else np.eye(2))
        if len(qubits) == 2:
            target = _embed_two_qubit(target_1q, qubits, device.ntr)
    else:
        sub = qubits
        target = target_1q
    frame_freqs = np.asarray(frame_freqs, dtype=float)

    lib = PulseLibrary(gd_half=dict(library.gd_half), gd_pi=dict(library.gd_pi),
                       cnot=dict(library.cnot))

    if parts[0] in ("xpih", "xpi"):
        q = qubits[0]
        table = lib.gd_half if parts[0] == "xpih" else lib.gd_pi
        x0, scales = _pack_gd(table[q], withf)

        def apply(x):
            table[q] = _unpack_gd(table[q], x, withf)
    else:
        key = (qubits[0], qubits[1])
        p0 = lib.cnot[key]
        if p0.scheme == "CR1":
            x0 = np.array([p0.amp_cr, p0.amp_cancel, p0.phi_cr, p0.phi_cancel, p0.phi_c, p0.phi_t])
            scales = np.array([0.02 * abs(p0.amp_cr) + 1e-6, 5e-4, 0.05, 0.05, 0.05, 0.05])

            def apply(x):
                lib.cnot[key] = replace(p0, amp_cr=float(x[0]), amp_cancel=float(x[1]),
                                        phi_cr=float(x[2]), phi_cancel=float(x[3]),
                                        phi_c=float(x[4]), phi_t=float(x[5]))
        else:
            x0 = np.array([p0.t_cr, p0.amp_cr] + ([p0.f_t] if withf else []))
            scales = np.array([2.0, 0.02 * abs(p0.amp_cr) + 1e-6, 0.0002][: x0.size])

            def apply(x):
                lib.cnot[key] = replace(p0, t_cr=max(float(x[0]), 0.0), amp_cr=float(x[1]),
                                        f_t=float(x[2]) if withf else p0.f_t)

    def objective(x):
        apply(x)
        gm = realize_gate(device, gate_kind, lib, frame_freqs, subspace_qubits=sub,
                          tau=tau, threads=threads)
        return distance(gm.m, target)[0]

    cfg = NmConfig(scales=scales, epsilon=epsilon, max_evals=max_evals)
    nm = nelder_mead(objective, x0, cfg)
    apply(nm.x_best)
    gm = realize_gate(device, gate_kind, lib, frame_freqs, subspace_qubits=sub,
                      tau=tau, threads=threads)
    delta, z = distance(gm.m, target)
    return OptResult(gate_kind=gate_kind, library=lib, delta=delta, z=z, matrix=gm,
                     nm=nm, frame_freqs=frame_freqs)


def _embed_two_qubit(u4: np.ndarray, qubits, n: int) -> np.ndarray:
    from .circuits import _embed

    return _embed(u4, tuple(qubits), n)


def write_trace_csv(path, nm: NmResult, param_names) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("eval," + ",".join(param_names) + ",delta\n")
        for k, x, val in nm.evals:
            fh.write(f"{k}," + ",".join(f"{v!r}" for v in x) + f",{val!r}\n")


# ---------------------------------------------------------------------------
# conditional-oscillation tomography
# ---------------------------------------------------------------------------

def theory_initial_library(device: DeviceModel, freqs, t_x: float = 83.0,
                           amp_cr: float = 0.01, pairs=()) -> PulseLibrary:
    """Seed a pulse library from the closed-form initial values.

    Amplitudes come from the rotation-angle area rule, DRAG coefficients
    from -1/(2*anharmonicity), CNOT flat times from the integrated pi/4
    condition.  ``freqs`` are per-qubit drive frequencies in GHz.
    """
    from scipy.integrate import simpson

    from .device import drive_scale

    basis = device_basis(device)
    lib = PulseLibrary()
    tgrid = np.linspace(0.0, t_x, 4001)
    unit_area = simpson(gauss_envelope(tgrid, 1.0, t_x), x=tgrid)
    for q in range(device.ntr):
        p = device.transmons[q]
        b_ang = TWOPI * drive_scale(p)
        alpha_ang = TWOPI * (basis.transmons[q].energies[2] - 2.0 * basis.transmons[q].energies[1])
        amp_half = (math.pi / 2.0) / (b_ang * unit_area)
        beta = -1.0 / (2.0 * alpha_ang)
        lib.gd_half[q] = GdParams(f=freqs[q], t_x=t_x, amp=amp_half, beta=beta)
        lib.gd_pi[q] = GdParams(f=freqs[q], t_x=t_x, amp=2.0 * amp_half, beta=beta)
    for (c, t) in pairs:
        _, j_zx, _ = cr_theory(device, c, t, amp_cr)
        t_cr = cr2_initial_time(device, (c, t), amp_cr)
        lib.cnot[(c, t)] = CrParams(scheme="CR2", f_t=freqs[t], f_c=freqs[c],
                                    t_cr=t_cr, amp_cr=amp_cr,
                                    xi=math.pi if j_zx < 0 else 0.0)
    return lib


def cr_tomography(device: DeviceModel, control: int, target: int, amp_cr: float,
                  t_total: float = 500.0, f_target: float | None = None,
                  amp_cancel: float = 0.0, tau: float = 1e-3, t_rise: float = 15.0):
    """Extract the IX/ZX rates from target oscillations conditional on the control.

    A flat-top drive at the target frequency is applied to the control for
    each control state (optionally with a simultaneous cancellation tone of
    amplitude ``amp_cancel`` on the target); the signed x-rotation rate of
    the target Bloch vector is read from the unwrapped phase across the flat
    window.  Returns angular (j_ix, j_zx) in rad/ns.
    """
    if f_target is None:
        f_target = fit_frequency_of(device, target, duration=1000.0)
    t_cr = t_total - 2.0 * t_rise
    if t_cr <= 0:
        raise OptimizeError("t_total must exceed the rise and fall time")
    segs = [PulseSegment(t0=0.0, t1=t_total, target_kind="q", target_index=control,
                         carrier_f=f_target, phase=0.0, shape=Shape.GAUSSFLAT,
                         amp=amp_cr, env_t=t_cr, extra=t_rise)]
    if amp_cancel:
        segs.append(PulseSegment(t0=0.0, t1=t_total, target_kind="q", target_index=target,
                                 carrier_f=f_target, phase=0.0, shape=Shape.GAUSSFLAT,
                                 amp=amp_cancel, env_t=t_cr, extra=t_rise))
    sched = PulseSchedule(segs)
    window = np.arange(math.ceil(t_rise) + 1.0, t_rise + t_cr, 1.0)
    rates = []
    for ctrl_state in (0, 1):
        ms = [0] * device.ntr
        ms[control] = ctrl_state
        psi = StateVector.basis_state([0] * device.nres, ms)
        cfg = SolverConfig(tau=tau, snapshot_times=tuple(window))
        traj = evolve(psi, device, sched, cfg)
        bl = bloch_trajectory(traj)
        freqs = np.zeros(device.ntr)
        freqs[target] = f_target
        # move the target quadratures to the rotating frame: the stored states
        # are lab frame, so rotate each snapshot before reading the vector
        ry = np.empty(len(traj))
        rz = np.empty(len(traj))
        for n in range(len(traj)):
            st = traj.state(n)
            to_rotating_frame(st, freqs, t=traj.times[n])
            from .evaluator import bloch_vectors

            vec = bloch_vectors(st)[target]
            ry[n], rz[n] = vec[1], vec[2]
        sign_flip = -1.0 if ctrl_state == 1 else 1.0  # angle defined from |0> or |1>
        ang = np.unwrap(np.arctan2(-ry * sign_flip, rz * sign_flip))
        slope = np.polyfit(bl.times, ang, 1)[0]
        rates.append(slope)
    w0, w1 = rates
    return 0.5 * (w0 + w1), 0.5 * (w0 - w1)


def fit_frequency_of(device: DeviceModel, qubit: int, duration: float = 1000.0,
                     n_data: int = 10000, tau: float = 1e-3, others=None,
                     bracket_width: float = 0.25, detail: bool = False):
    """Fitted precession frequency (GHz) of one qubit prepared in |+>.

    ``others`` optionally maps transmon index -> level for spectator
    preparation.  The search bracket is centered on the isolated-transmon
    frequency.
    """
    basis = device_basis(device)
    amps = []
    plus = np.array([1.0, 1.0, 0.0, 0.0]) / math.sqrt(2.0)
    for i in range(device.ntr):
        if i == qubit:
            amps.append(plus)
        else:
            level = (others or {}).get(i, 0)
            a = np.zeros(4)
            a[level] = 1.0
            amps.append(a)
    psi = StateVector.product([np.array([1.0, 0, 0, 0])] * device.nres, amps)
    times = np.linspace(0.0, duration, n_data + 1)[1:]
    times = np.round(times / tau) * tau
    cfg = SolverConfig(tau=tau, snapshot_times=tuple(times))
    traj = evolve(psi, device, None, cfg)
    bl = bloch_trajectory(traj)
    w0 = TWOPI * basis.transmons[qubit].energies[1]
    fit = fit_qubit_frequency(bl.times, bl.vectors[:, qubit, 0], bl.vectors[:, qubit, 1],
                              (w0 - TWOPI * bracket_width / 2, w0 + TWOPI * bracket_width / 2))
    if detail:
        return fit.omega / TWOPI, fit
    return fit.omega / TWOPI

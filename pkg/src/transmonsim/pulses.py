"""Pulse envelopes, schedules, and the elementary gate pulse emitters.

A schedule is a time-sorted list of segments; the drive seen by transmon i is

    n_g_i(t) = sum over segments on i of envelope(t - t0) * cos(2*pi*f*t - phase)

with the carrier phase referenced to absolute time.  Z rotations are virtual:
they only shift the phases of later pulses on the same qubit, tracked by a
per-transmon phase register.

Segment times are quantized to the 1e-3 ns grid used by the solver's default
time step, so compiled schedules are exactly reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device import TWOPI, DeviceModel, device_basis, drive_scale

T_RISE_DEFAULT = 15.0  # ns, flat-top Gaussian rise/fall time


class PulseError(ValueError):
    pass


class Shape(enum.Enum):
    GAUSS = "gauss"
    GAUSSDOT = "gaussdot"
    GAUSSFLAT = "gaussflat"
    ZERO = "zero"


def _round3(x: float) -> float:
    return round(float(x), 3)


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------

def gauss_envelope(t, amp, t_x, sigma=None):
    """Vertically shifted Gaussian: zero at both ends, ``amp`` at the center."""
    sigma = t_x / 4.0 if sigma is None else sigma
    if sigma <= 0:
        raise PulseError("sigma must be positive")
    t = np.asarray(t, dtype=float)
    off = math.exp(-t_x ** 2 / (8.0 * sigma ** 2))
    val = amp * (np.exp(-((t - 0.5 * t_x) ** 2) / (2.0 * sigma ** 2)) - off) / (1.0 - off)
    return val if val.ndim else float(val)


def gaussdot_envelope(t, amp, beta, t_x, sigma=None):
    """DRAG quadrature: beta times the analytic derivative of gauss_envelope."""
    sigma = t_x / 4.0 if sigma is None else sigma
    t = np.asarray(t, dtype=float)
    off = math.exp(-t_x ** 2 / (8.0 * sigma ** 2))
    x = (t - 0.5 * t_x) / sigma
    val = -beta * amp * (x / sigma) * np.exp(-0.5 * x * x) / (1.0 - off)
    return val if val.ndim else float(val)


def flattop_envelope(t, amp, t_cr, t_rise=T_RISE_DEFAULT):
    """Gaussian rise, flat top of length t_cr, Gaussian fall; continuous throughout."""
    t = np.asarray(t, dtype=float)
    rise = gauss_envelope(t, amp, 2.0 * t_rise, t_rise / 3.0)
    fall = gauss_envelope(t - t_cr, amp, 2.0 * t_rise, t_rise / 3.0)
    val = np.where(t < t_rise, rise, np.where(t <= t_rise + t_cr, amp, fall))
    return val if val.ndim else float(val)


# ---------------------------------------------------------------------------
# segments and schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseSegment:
    """One drive segment.

    ``env_t`` is the shape's duration parameter (T_X for gauss/gaussdot, the
    flat time T_CR for gaussflat); ``extra`` is sigma (gauss) or the rise
    time (gaussflat).  ``amp`` for a gaussdot segment is the product
    beta*Omega_X, i.e. the segment evaluates beta * dOmega_G/dt.
    """

    t0: float
    t1: float
    target_kind: str  # 'q' or 'r'
    target_index: int
    carrier_f: float
    phase: float
    shape: Shape
    amp: float
    env_t: float
    extra: float

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise PulseError(f"segment must have t1 > t0, got [{self.t0}, {self.t1}]")
        if self.target_kind not in ("q", "r"):
            raise PulseError(f"target kind must be 'q' or 'r', got {self.target_kind!r}")
        if not math.isfinite(self.amp):
            raise PulseError("segment amplitude must be finite")

    def envelope(self, t):
        """Envelope value at absolute time t (zero outside the segment)."""
        tl = np.asarray(t, dtype=float) - self.t0
        inside = (tl >= 0) & (np.asarray(t, dtype=float) < self.t1)
        if self.shape is Shape.GAUSS:
            val = gauss_envelope(tl, self.amp, self.env_t, self.extra)
        elif self.shape is Shape.GAUSSDOT:
            # amp already folds in the DRAG coefficient: amp * d(unit gauss)/dt
            val = gaussdot_envelope(tl, self.amp, 1.0, self.env_t, self.extra)
        elif self.shape is Shape.GAUSSFLAT:
            val = flattop_envelope(tl, self.amp, self.env_t, self.extra)
        else:
            val = np.zeros_like(tl)
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    def drive(self, t):
        """Full drive value envelope(t) * cos(2 pi f t - phase)."""
        return self.envelope(t) * np.cos(TWOPI * self.carrier_f * np.asarray(t, dtype=float) - self.phase)


@dataclass
class PulseSchedule:
    segments: list = field(default_factory=list)

    @property
    def duration(self) -> float:
        return max((s.t1 for s in self.segments), default=0.0)

    def extend(self, segs) -> "PulseSchedule":
        self.segments.extend(segs)
        return self

    def sorted(self) -> "PulseSchedule":
        return PulseSchedule(sorted(self.segments, key=lambda s: (s.t0, s.target_kind, s.target_index)))

    def drive(self, kind: str, index: int, t):
        """Summed drive on one site at absolute time(s) t."""
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for s in self.segments:
            if s.target_kind == kind and s.target_index == index:
                total = total + s.drive(t)
        return total if total.ndim else float(total)


# ---------------------------------------------------------------------------
# virtual-Z register
# ---------------------------------------------------------------------------

class VZRegister:
    """Per-transmon phase offsets implementing virtual Z rotations.

    ``gamma[q]`` is added to the nominal phase of every subsequent pulse on
    qubit q; a Z rotation by theta decrements it (pulse(gamma) Z^theta =
    Z^theta pulse(gamma - theta)).
    """

    def __init__(self, n: int):
        self.gamma = np.zeros(n)

    def apply_vz(self, q: int, theta: float) -> "VZRegister":
        self.gamma[q] = (self.gamma[q] - theta) % TWOPI
        return self

    def phase(self, q: int) -> float:
        return float(self.gamma[q])

    def copy(self) -> "VZRegister":
        out = VZRegister(len(self.gamma))
        out.gamma[:] = self.gamma
        return out


def apply_vz(q: int, theta: float, vz: VZRegister) -> VZRegister:
    """Functional form of VZRegister.apply_vz (returns an updated copy)."""
    return vz.copy().apply_vz(q, theta)


# ---------------------------------------------------------------------------
# gate parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GdParams:
    """Gaussian+DRAG pulse: drive frequency f (GHz), duration (ns), amplitude, DRAG beta (ns)."""

    f: float
    t_x: float
    amp: float
    beta: float

    def __post_init__(self):
        if self.t_x <= 0:
            raise PulseError("GD pulse duration must be positive")

    @property
    def sigma(self) -> float:
        return self.t_x / 4.0


@dataclass(frozen=True)
class CrParams:
    """Cross-resonance CNOT parameters; the CR1 phase fields stay None for CR2/CR4."""

    scheme: str  # CR1 | CR2 | CR4
    f_t: float
    t_cr: float
    amp_cr: float
    f_c: float | None = None
    amp_cancel: float = 0.0
    phi_cr: float = 0.0
    phi_cancel: float = 0.0
    phi_c: float = 0.0
    phi_t: float = 0.0
    xi: float = 0.0
    t_rise: float = T_RISE_DEFAULT

    def __post_init__(self):
        if self.scheme not in ("CR1", "CR2", "CR4"):
            raise PulseError(f"unknown CR scheme {self.scheme!r}")
        if self.t_cr < 0:
            raise PulseError("t_cr must be non-negative")


@dataclass
class PulseLibrary:
    """Calibrated pulse parameters keyed the way the compiler looks them up."""

    gd_half: dict = field(default_factory=dict)   # q -> GdParams
    gd_pi: dict = field(default_factory=dict)     # q -> GdParams
    cnot: dict = field(default_factory=dict)      # (c, t) -> CrParams


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _gd_segments(q: int, p: GdParams, phase: float, t_start: float) -> list:
    dur = _round3(p.t_x)
    base = dict(t0=t_start, t1=t_start + dur, target_kind="q", target_index=q,
                carrier_f=p.f, env_t=p.t_x, extra=p.sigma)
    return [
        PulseSegment(shape=Shape.GAUSS, phase=phase % TWOPI, amp=p.amp, **base),
        PulseSegment(shape=Shape.GAUSSDOT, phase=(phase + 0.5 * math.pi) % TWOPI,
                     amp=p.amp * p.beta, **base),
    ]


def emit_gd(q: int, kind: str, vz: VZRegister, p: GdParams, t_start: float) -> list:
    """GD pulse on qubit q: Gaussian at the VZ phase plus its DRAG quadrature."""
    if kind not in ("HALF", "PI"):
        raise PulseError(f"GD kind must be HALF or PI, got {kind!r}")
    if p is None:
        raise PulseError(f"no GD parameters for qubit {q}")
    return _gd_segments(q, p, vz.phase(q), t_start)


def emit_zero(q: int, duration: float, t_start: float) -> list:
    """Explicit idle segment so schedules encode undriven stretches."""
    dur = _round3(duration)
    return [PulseSegment(t0=t_start, t1=t_start + dur, target_kind="q", target_index=q,
                         carrier_f=0.0, phase=0.0, shape=Shape.ZERO, amp=0.0,
                         env_t=dur, extra=0.0)]


def _flattop_segment(q: int, f: float, phase: float, amp: float, t_cr: float,
                     t_rise: float, t_start: float) -> PulseSegment:
    dur = _round3(t_cr + 2.0 * t_rise)
    return PulseSegment(t0=t_start, t1=t_start + dur, target_kind="q", target_index=q,
                        carrier_f=f, phase=phase % TWOPI, shape=Shape.GAUSSFLAT,
                        amp=amp, env_t=t_cr, extra=t_rise)


def emit_cnot(control: int, target: int, scheme: str, vz: VZRegister,
              params: CrParams, library: PulseLibrary, t_start: float) -> list:
    """Emit a CNOT pulse sequence and fold its trailing Z corrections into vz.

    The echoed schemes reference the library's single-qubit pi and pi/2
    pulses on the control and target qubits.  Only the target's accumulated
    phase enters the emitted pulse phases; the control qubit commutes with Z.
    """
    if params.scheme != scheme:
        raise PulseError(f"parameter record is for {params.scheme}, requested {scheme}")
    gt = vz.phase(target)  # = -theta_T
    segs: list = []
    t = t_start
    if scheme == "CR1":
        dur = params.t_cr + 2.0 * params.t_rise
        segs.append(_flattop_segment(control, params.f_t, params.phi_cr + gt,
                                     params.amp_cr, params.t_cr, params.t_rise, t))
        segs.append(_flattop_segment(target, params.f_t, params.phi_cancel + gt,
                                     params.amp_cancel, params.t_cr, params.t_rise, t))
        vz.apply_vz(control, params.phi_c)
        vz.apply_vz(target, params.phi_t)
        return segs

    gd_pi_c = library.gd_pi.get(control)
    gd_half_t = library.gd_half.get(target)
    if gd_pi_c is None or gd_half_t is None:
        raise PulseError(f"CNOT {control}->{target} needs xpi-{control} and xpih-{target} pulses")
    xi = params.xi
    if scheme == "CR2":
        # simultaneous pi/2 on target and pi on control, then the echoed flat-tops
        segs += _gd_segments(target, gd_half_t, xi + gt, t)
        segs += _gd_segments(control, gd_pi_c, 0.0, t)
        t += max(_round3(gd_pi_c.t_x), _round3(gd_half_t.t_x))
        segs.append(_flattop_segment(control, params.f_t, gt, params.amp_cr,
                                     params.t_cr, params.t_rise, t))
        t = segs[-1].t1
        segs += _gd_segments(control, gd_pi_c, 0.5 * math.pi, t)
        t += _round3(gd_pi_c.t_x)
        segs.append(_flattop_segment(control, params.f_t, math.pi + gt, params.amp_cr,
                                     params.t_cr, params.t_rise, t))
        vz.apply_vz(control, xi - 0.5 * math.pi)
        return segs

    gd_pi_t = library.gd_pi.get(target)
    if gd_pi_t is None:
        raise PulseError(f"CR4 CNOT {control}->{target} also needs xpi-{target}")
    segs += _gd_segments(target, gd_half_t, xi + gt, t)
    t += _round3(gd_half_t.t_x)
    for half, phases in enumerate(((gt, math.pi + gt), (math.pi + gt, gt))):
        segs.append(_flattop_segment(control, params.f_t, phases[0], params.amp_cr,
                                     params.t_cr, params.t_rise, t))
        t = segs[-1].t1
        segs += _gd_segments(control, gd_pi_c, 0.5 * math.pi if half == 0 else 1.5 * math.pi, t)
        t += _round3(gd_pi_c.t_x)
        segs.append(_flattop_segment(control, params.f_t, phases[1], params.amp_cr,
                                     params.t_cr, params.t_rise, t))
        t = segs[-1].t1
        if half == 0:
            segs += _gd_segments(target, gd_pi_t, math.pi + xi + gt, t)
            t += _round3(gd_pi_t.t_x)
    vz.apply_vz(control, xi - 0.5 * math.pi)
    return segs


def cnot_duration(params: CrParams, library: PulseLibrary, control: int, target: int) -> float:
    if params.scheme == "CR1":
        return _round3(params.t_cr + 2.0 * params.t_rise)
    txp = _round3(library.gd_pi[control].t_x)
    txh = _round3(library.gd_half[target].t_x)
    flat = _round3(params.t_cr + 2.0 * params.t_rise)
    if params.scheme == "CR2":
        return max(txp, txh) + 2.0 * flat + txp
    txpt = _round3(library.gd_pi[target].t_x)
    return txh + 4.0 * flat + 2.0 * txp + txpt


# ---------------------------------------------------------------------------
# cross-resonance theory
# ---------------------------------------------------------------------------

def _shared_resonator(device: DeviceModel, control: int, target: int) -> int:
    gmap = device.g_map()
    for r in range(device.nres):
        if (r, control) in gmap and (r, target) in gmap:
            return r
    raise PulseError(f"transmons {control} and {target} share no resonator")


def cr_theory(device: DeviceModel, control: int, target: int, amp_cr: float):
    """Perturbative IX/ZX interaction rates for a CR drive, angular (rad/ns).

    Returns ``(j_ix, j_zx, j_xch)`` from the third-order closed forms, with
    the detuning and anharmonicity taken from the isolated transmon spectra
    and the exchange coupling from the shared resonator.
    """
    r = _shared_resonator(device, control, target)
    basis = device_basis(device)
    gmap = device.g_map()
    e_c = basis.transmons[control].energies
    e_t = basis.transmons[target].energies
    w_c, w_t = TWOPI * e_c[1], TWOPI * e_t[1]
    alpha_c = TWOPI * (e_c[2] - 2.0 * e_c[1])
    omega = TWOPI * device.resonators[r].omega
    g_pair = []
    for i in (control, target):
        p = device.transmons[i]
        g_pair.append(-((p.ej / (32.0 * p.ec)) ** 0.25) * TWOPI * gmap[(r, i)])
    g_c, g_t = g_pair
    j_xch = g_c * g_t * (w_c + w_t - 2.0 * omega) / (2.0 * (w_c - omega) * (w_t - omega))
    delta = w_c - w_t
    b_c = TWOPI * drive_scale(device.transmons[control])
    x = b_c * amp_cr
    j_ix = (-j_xch / (alpha_c + delta) * x
            + j_xch * alpha_c * delta
            / ((alpha_c + delta) ** 3 * (alpha_c + 2 * delta) * (3 * alpha_c + 2 * delta)) * x ** 3)
    j_zx = (-j_xch * alpha_c / (delta * (alpha_c + delta)) * x
            + j_xch * alpha_c ** 2
            * (3 * alpha_c ** 3 + 11 * alpha_c ** 2 * delta + 15 * alpha_c * delta ** 2 + 9 * delta ** 3)
            / (2 * delta ** 3 * (alpha_c + delta) ** 3 * (alpha_c + 2 * delta) * (3 * alpha_c + 2 * delta))
            * x ** 3)
    return j_ix, j_zx, j_xch


def flattop_unit_area(t_cr: float, t_rise: float = T_RISE_DEFAULT, n: int = 4001) -> float:
    """Area under a unit-amplitude flat-top envelope (Simpson on each part)."""
    from scipy.integrate import simpson

    edge = np.linspace(0.0, t_rise, n)
    rise = simpson(flattop_envelope(edge, 1.0, t_cr, t_rise), x=edge)
    return t_cr + 2.0 * rise


def cr2_initial_time(device: DeviceModel, pair: tuple, amp_cr: float,
                     t_rise: float = T_RISE_DEFAULT, t_max: float = 5000.0) -> float:
    """Flat time T_CR making the integrated linear ZX angle equal +-pi/4.

    Solved by bisection on the flat time; the integrand follows the linear
    theory term with the drive replaced by the flat-top envelope.
    """
    if amp_cr <= 0:
        raise PulseError("amp_cr must be positive")
    control, target = pair
    j_ix, j_zx, _ = cr_theory(device, control, target, amp_cr)
    slope = j_zx / amp_cr  # linear+cubic at this amplitude; cubic is tiny here

    def angle(t_cr):
        return abs(slope) * amp_cr * flattop_unit_area(t_cr, t_rise)

    lo, hi = 0.0, t_max
    if angle(hi) < math.pi / 4.0:
        raise PulseError(f"no CR2 solution below {t_max} ns at amplitude {amp_cr}")
    if angle(lo) > math.pi / 4.0:
        return 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if angle(mid) < math.pi / 4.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# pulse library file format
# ---------------------------------------------------------------------------

def parse_pulse_library(text: str) -> PulseLibrary:
    """Parse 'pulse xpih-<i> f .. T .. A .. beta ..' / 'pulse cnot-<c>-<t> ..' lines."""
    lib = PulseLibrary()

    def err(lineno, msg):
        raise PulseError(f"pulse file line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] != "pulse" or len(tok) < 2:
            err(lineno, f"expected 'pulse <name> ...', got {line!r}")
        name = tok[1]
        kv = {}
        rest = tok[2:]
        if len(rest) % 2 != 0:
            err(lineno, "key/value tokens must pair up")
        for k, v in zip(rest[0::2], rest[1::2]):
            kv[k] = v
        try:
            if name.startswith("xpih-") or name.startswith("xpi-"):
                q = int(name.split("-")[1])
                p = GdParams(f=float(kv.pop("f")), t_x=float(kv.pop("T")),
                             amp=float(kv.pop("A")), beta=float(kv.pop("beta")))
                (lib.gd_half if name.startswith("xpih-") else lib.gd_pi)[q] = p
            elif name.startswith("cnot-"):
                _, c_s, t_s = name.split("-")
                scheme = kv.pop("scheme")
                p = CrParams(
                    scheme=scheme,
                    f_t=float(kv.pop("fT")),
                    f_c=float(kv.pop("fC")) if "fC" in kv else None,
                    t_cr=float(kv.pop("Tcr")),
                    amp_cr=float(kv.pop("Acr")),
                    amp_cancel=float(kv.pop("Acancel", 0.0)),
                    phi_cr=float(kv.pop("phiCR", 0.0)),
                    phi_cancel=float(kv.pop("phiCancel", 0.0)),
                    phi_c=float(kv.pop("phiC", 0.0)),
                    phi_t=float(kv.pop("phiT", 0.0)),
                    xi=float(kv.pop("xi", 0.0)),
                )
                lib.cnot[(int(c_s), int(t_s))] = p
            else:
                err(lineno, f"unknown pulse name {name!r}")
        except KeyError as exc:
            err(lineno, f"missing field {exc} for {name}")
        except ValueError as exc:
            err(lineno, f"bad value ({exc})")
        if kv:
            err(lineno, f"unknown fields {sorted(kv)} for {name}")
    return lib


def format_pulse_library(lib: PulseLibrary) -> str:
    lines = []
    for prefix, table in (("xpih", lib.gd_half), ("xpi", lib.gd_pi)):
        for q in sorted(table):
            p = table[q]
            lines.append(f"pulse {prefix}-{q} f {p.f!r} T {p.t_x!r} A {p.amp!r} beta {p.beta!r}")
    for (c, t) in sorted(lib.cnot):
        p = lib.cnot[(c, t)]
        parts = [f"pulse cnot-{c}-{t} scheme {p.scheme} fT {p.f_t!r}"]
        if p.f_c is not None:
            parts.append(f"fC {p.f_c!r}")
        parts.append(f"Tcr {p.t_cr!r} Acr {p.amp_cr!r}")
        if p.scheme == "CR1":
            parts.append(f"Acancel {p.amp_cancel!r} phiCR {p.phi_cr!r} "
                         f"phiCancel {p.phi_cancel!r} phiC {p.phi_c!r} phiT {p.phi_t!r}")
        if p.xi:
            parts.append(f"xi {p.xi!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_pulse_library(path) -> PulseLibrary:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pulse_library(fh.read())


# ---------------------------------------------------------------------------
# schedule file format
# ---------------------------------------------------------------------------

def format_schedule(schedule: PulseSchedule) -> str:
    """One segment per line, times in ns with 3 decimals."""
    lines = []
    for s in schedule.sorted().segments:
        extra = ""
        if s.shape in (Shape.GAUSS, Shape.GAUSSDOT):
            extra = f" sigma={s.extra!r}"
        elif s.shape is Shape.GAUSSFLAT:
            extra = f" rise={s.extra!r}"
        lines.append(
            f"{s.t0:.3f} {s.t1:.3f} {s.target_kind}{s.target_index} {s.phase!r} "
            f"{s.shape.value} f={s.carrier_f!r} A={s.amp!r} T={s.env_t!r}{extra}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_schedule(text: str) -> PulseSchedule:
    segs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            t0, t1 = float(tok[0]), float(tok[1])
            kind, index = tok[2][0], int(tok[2][1:])
            phase = float(tok[3])
            shape = Shape(tok[4])
            kv = dict(part.split("=", 1) for part in tok[5:])
            segs.append(PulseSegment(
                t0=t0, t1=t1, target_kind=kind, target_index=index,
                carrier_f=float(kv["f"]), phase=phase, shape=shape,
                amp=float(kv["A"]), env_t=float(kv["T"]),
                extra=float(kv.get("sigma", kv.get("rise", 0.0))),
            ))
        except (ValueError, IndexError, KeyError) as exc:
            raise PulseError(f"schedule line {lineno}: {exc}") from exc
    return PulseSchedule(segs)


def load_schedule(path) -> PulseSchedule:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_schedule(fh.read())


def save_schedule(schedule: PulseSchedule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_schedule(schedule))

"""Electromagnetic-environment tooling and a Lindblad master-equation integrator.

A lossless environment seen by a single junction is characterized by the
zeros of Im Y(omega); each mode contributes a frequency and a dimensionless
impedance coefficient xi.  Two mappings turn the mode list into the
parameters of a star-shaped transmon + resonator + bath model: an orthogonal
transformation valid within the rotating-wave approximation, and an exact
symplectic one in position-momentum coordinates.  Frequencies here are
angular (rad/ns); conversions to the device-file GHz convention divide by
2 pi at the boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .device import TWOPI, DeviceModel, ResonatorParams, make_device


class EnvironmentError_(ValueError):
    pass


@dataclass(frozen=True)
class ModeSpec:
    """Environment modes: angular frequencies (rad/ns, increasing) and xi coefficients."""

    omegas: np.ndarray
    xis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))
        object.__setattr__(self, "xis", np.asarray(self.xis, dtype=float))
        if self.omegas.shape != self.xis.shape:
            raise EnvironmentError_("omegas and xis must have equal length")
        if np.any(np.diff(self.omegas) <= 0) or np.any(self.omegas <= 0):
            raise EnvironmentError_("frequencies must be positive and strictly increasing")
        if np.any(self.xis <= 0):
            raise EnvironmentError_("xi coefficients must be positive")

    @property
    def n_modes(self) -> int:
        return self.omegas.size


@dataclass
class EnvParams:
    """Model parameters produced by the RWA / symplectic mappings (angular units)."""

    ec: float
    ej: float
    omega_tr: float
    omega: float
    g: float
    cap_g: float
    w: np.ndarray
    lam: np.ndarray
    transform: np.ndarray


@dataclass
class BathModel:
    """Random-bath parameters in the device GHz convention."""

    ec: float
    ej: float
    omega_res: float
    g_or_g: float
    w: np.ndarray
    lam: np.ndarray

    def to_device(self, fock_offset: int = 0, max_dim: int = 4 ** 13) -> DeviceModel:
        """Star topology: central resonator 0 coupled to the transmon and all bath modes."""
        resonators = [ResonatorParams(self.omega_res, fock_offset)]
        resonators += [ResonatorParams(float(w), 0) for w in self.w]
        lam = {(0, 1 + l): float(v) for l, v in enumerate(self.lam)}
        return make_device([(self.ec, self.ej)], resonators,
                           g={(0, 0): self.g_or_g}, lam=lam, max_dim=max_dim)


# ---------------------------------------------------------------------------
# Foster extraction
# ---------------------------------------------------------------------------

def foster_impedance(modes: ModeSpec, caps: np.ndarray):
    """Synthetic series-LC impedance Z(w) = sum_j i w / C_j / (w_j^2 - w^2)."""
    omegas = modes.omegas

    def z(w):
        return np.sum(1j * w / caps / (omegas ** 2 - w ** 2))

    return z


def foster_extract(admittance, omega_grid, phi0: float = 1.0, rel_tol: float = 1e-10):
    """Mode frequencies and impedance data from an admittance Y(omega).

    ``admittance`` is a callable returning complex Y; its Im-part zeros are
    bracketed by sign changes on ``omega_grid`` and polished by bisection.
    Returns (ModeSpec, C_j, L_j).  xi_j = sqrt(Z_eff_j) / phi0 with the flux
    scale supplied by the caller (1 for synthetic work).
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    im = np.array([admittance(w).imag for w in omega_grid])
    zeros = []
    for k in range(omega_grid.size - 1):
        a, b = omega_grid[k], omega_grid[k + 1]
        fa, fb = im[k], im[k + 1]
        if fa == 0.0:
            zeros.append(a)
            continue
        if fa * fb >= 0.0:
            continue
        bracket_mag = max(abs(fa), abs(fb))
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = admittance(mid).imag
            if fa * fm <= 0.0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
            if b - a <= rel_tol * mid:
                break
        mid = 0.5 * (a + b)
        # Im Y also changes sign through its poles (the antiresonances);
        # keep only crossings where the magnitude shrinks toward zero
        if abs(admittance(mid).imag) > bracket_mag:
            continue
        zeros.append(mid)
    if not zeros:
        raise EnvironmentError_("no zeros of Im Y found on the grid")
    omegas = np.array(zeros)
    caps = np.empty_like(omegas)
    for j, w in enumerate(omegas):
        h = max(w * 1e-6, 1e-9)
        dy = (admittance(w + h).imag - admittance(w - h).imag) / (2.0 * h)
        if abs(dy) < 1e-14:
            raise EnvironmentError_(f"vanishing Im Y' at mode {w}")
        caps[j] = abs(dy) / 2.0
    inds = 2.0 / (omegas ** 2 * np.abs(2.0 * caps))
    z_eff = 2.0 / (omegas * 2.0 * caps)
    xis = np.sqrt(z_eff) / phi0
    return ModeSpec(omegas=omegas, xis=xis), caps, inds


# ---------------------------------------------------------------------------
# mappings to the model Hamiltonian
# ---------------------------------------------------------------------------

def _complement_basis(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of span{u0, u1} (deterministic QR)."""
    n = u0.size
    stack = np.column_stack([u0, u1, np.eye(n)])
    q, _ = np.linalg.qr(stack)
    return q[:, 2:n]


def map_rwa(modes: ModeSpec) -> EnvParams:
    """Orthogonal mode transformation valid in the rotating-wave approximation."""
    if modes.n_modes < 2:
        raise EnvironmentError_("the mapping needs at least two modes")
    w = modes.omegas
    xi = modes.xis
    u0 = xi / np.linalg.norm(xi)
    omega_tr = float(u0 @ (w * u0))
    resid = w * u0 - omega_tr * u0
    nr = np.linalg.norm(resid)
    if nr < 1e-14 * max(abs(omega_tr), 1.0):
        raise EnvironmentError_("all mode frequencies equal; the second column is degenerate")
    u1 = resid / nr
    omega = float(u1 @ (w * u1))
    g = float(u0 @ (w * u1))
    comp = _complement_basis(u0, u1)
    sub = comp.T @ (w[:, None] * comp)
    wl, vecs = np.linalg.eigh(sub)
    cols = comp @ vecs
    lam = cols.T @ (w * u1)
    xi2 = float(np.sum(xi ** 2))
    ec = float(np.sum(xi ** 2 * w)) / 8.0
    ej = float(np.sum(xi ** 2 * w)) / xi2 ** 2
    cap_g = -((32.0 * ec / ej) ** 0.25) * g
    transform = np.column_stack([u0, u1, cols])
    return EnvParams(ec=ec, ej=ej, omega_tr=omega_tr, omega=omega, g=g, cap_g=cap_g,
                     w=wl, lam=lam, transform=transform)


def map_symplectic(modes: ModeSpec) -> EnvParams:
    """Exact mapping via an orthogonal block transformation of (x, y) coordinates."""
    if modes.n_modes < 2:
        raise EnvironmentError_("the mapping needs at least two modes")
    w = modes.omegas
    xi = modes.xis
    w2 = w ** 2
    o0 = (xi / np.sqrt(w)) / np.linalg.norm(xi / np.sqrt(w))
    omega_tr = math.sqrt(float(o0 @ (w2 * o0)))
    resid = w2 * o0 - omega_tr ** 2 * o0
    nr = np.linalg.norm(resid)
    if nr < 1e-14 * max(omega_tr ** 2, 1.0):
        raise EnvironmentError_("all mode frequencies equal; the second column is degenerate")
    o1 = resid / nr
    omega = math.sqrt(float(o1 @ (w2 * o1)))
    comp = _complement_basis(o0, o1)
    sub = comp.T @ (w2[:, None] * comp)
    wl2, vecs = np.linalg.eigh(sub)
    cols = comp @ vecs
    wl = np.sqrt(np.maximum(wl2, 0.0))
    g = float(o1 @ (w2 * o0)) / (2.0 * math.sqrt(omega_tr * omega))
    lam = (cols.T @ (w2 * o1)) / (2.0 * np.sqrt(omega * wl))
    ec = float(np.sum(xi ** 2 * w)) / 8.0
    ej = 1.0 / float(np.sum(xi ** 2 / w))
    cap_g = -((32.0 * ec / ej) ** 0.25) * g
    transform = np.column_stack([o0, o1, cols])
    return EnvParams(ec=ec, ej=ej, omega_tr=omega_tr, omega=omega, g=g, cap_g=cap_g,
                     w=wl, lam=lam, transform=transform)


def arrow_matrix(params: EnvParams, squared: bool = False) -> np.ndarray:
    """Reassemble the coupled-mode matrix from mapped parameters (for round trips)."""
    n = 2 + params.w.size
    a = np.zeros((n, n))
    if squared:
        a[0, 0] = params.omega_tr ** 2
        a[1, 1] = params.omega ** 2
        a[0, 1] = a[1, 0] = 2.0 * params.g * math.sqrt(params.omega_tr * params.omega)
        for l, (wl, lam) in enumerate(zip(params.w, params.lam)):
            a[l + 2, l + 2] = wl ** 2
            a[1, l + 2] = a[l + 2, 1] = 2.0 * lam * math.sqrt(params.omega * wl)
    else:
        a[0, 0] = params.omega_tr
        a[1, 1] = params.omega
        a[0, 1] = a[1, 0] = params.g
        for l, (wl, lam) in enumerate(zip(params.w, params.lam)):
            a[l + 2, l + 2] = wl
            a[1, l + 2] = a[l + 2, 1] = lam
    return a


def random_bath(base: DeviceModel, n_modes: int, lambda_max: float, seed: int) -> BathModel:
    """Seeded bath: frequencies ~ N(Omega, 1 GHz), couplings ~ U(0, lambda_max)."""
    if n_modes < 1:
        raise EnvironmentError_("a bath needs at least one mode")
    rng = np.random.default_rng(seed)
    tr = base.transmons[0]
    res = base.resonators[0]
    g0 = base.g_map().get((0, 0), 0.0)
    w = rng.normal(res.omega, 1.0, size=n_modes)
    w = np.abs(w)
    lam = rng.uniform(0.0, lambda_max, size=n_modes)
    return BathModel(ec=tr.ec, ej=tr.ej, omega_res=res.omega, g_or_g=g0, w=w, lam=lam)


# ---------------------------------------------------------------------------
# Lindblad integrator
# ---------------------------------------------------------------------------

def _lindblad_rhs(h, rho, kappa, a_op, a_dag, a_dag_a):
    drho = -1j * (h @ rho - rho @ h)
    if kappa:
        drho = drho + kappa * (a_op @ rho @ a_dag - 0.5 * (a_dag_a @ rho + rho @ a_dag_a))
    return drho


def lindblad_evolve(h: np.ndarray, rho0: np.ndarray, kappa: float, a_op: np.ndarray,
                    t_end: float, dt: float, snapshot_every: int = 1):
    """Fixed-step RK4 integration of drho/dt = -i[H, rho] + kappa D[a](rho).

    Hermiticity is enforced by symmetrization after each step; a trace drift
    beyond 1e-6 aborts with a suggestion to reduce dt.  Returns (times, rhos).
    """
    h = np.asarray(h, dtype=complex)
    rho = np.asarray(rho0, dtype=complex).copy()
    if kappa < 0 or dt <= 0:
        raise EnvironmentError_("kappa must be >= 0 and dt positive")
    evals = np.linalg.eigvalsh(h)
    spread = float(evals.max() - evals.min())
    if spread * dt > 0.5:
        warnings.warn(
            f"dt = {dt} barely resolves the spectral spread {spread:.3g} rad/ns; "
            "expect integration error", stacklevel=2)
    a_dag = a_op.conj().T
    a_dag_a = a_dag @ a_op
    n_steps = int(round(t_end / dt))
    times = [0.0]
    rhos = [rho.copy()]
    tr0 = np.trace(rho).real
    for step in range(n_steps):
        k1 = _lindblad_rhs(h, rho, kappa, a_op, a_dag, a_dag_a)
        k2 = _lindblad_rhs(h, rho + 0.5 * dt * k1, kappa, a_op, a_dag, a_dag_a)
        k3 = _lindblad_rhs(h, rho + 0.5 * dt * k2, kappa, a_op, a_dag, a_dag_a)
        k4 = _lindblad_rhs(h, rho + dt * k3, kappa, a_op, a_dag, a_dag_a)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        if (step + 1) % snapshot_every == 0 or step == n_steps - 1:
            drift = abs(np.trace(rho).real - tr0)
            if not drift <= 1e-6:  # catches NaN from an unstable step size too
                raise EnvironmentError_(
                    f"trace drifted by {drift:.2e} at t = {(step + 1) * dt:.3f} ns; reduce dt")
            times.append((step + 1) * dt)
            rhos.append(rho.copy())
    return np.array(times), rhos


def lowering_operator(n_levels: int, offset: int = 0) -> np.ndarray:
    """Truncated lowering operator; with ``offset`` the window covers offset..offset+n-1."""
    return np.diag(np.sqrt(np.arange(offset + 1, offset + n_levels, dtype=float)), 1)


# ---------------------------------------------------------------------------
# excitation probabilities, coherent states
# ---------------------------------------------------------------------------

def excitation_probability(state, n_transmon_levels: int = 4) -> float:
    """Probability of the (single) transmon occupying any level above its ground state.

    Accepts a solver StateVector (one transmon, transmon bits lowest) or a
    dense density matrix on a (resonator x transmon) product space with the
    transmon index minor.
    """
    from .solver import StateVector

    if isinstance(state, StateVector):
        if state.ntr != 1:
            raise EnvironmentError_("excitation probability requires a single transmon")
        arr = np.abs(state.coeffs.reshape(-1, 4)) ** 2
        return float(1.0 - arr[:, 0].sum() / arr.sum())
    rho = np.asarray(state)
    diag = np.real(np.diag(rho)).reshape(-1, n_transmon_levels)
    tr = diag.sum()
    return float(1.0 - diag[:, 0].sum() / tr)


def average_excitation(times, pvals) -> float:
    """Time average by the trapezoid rule."""
    times = np.asarray(times, dtype=float)
    pvals = np.asarray(pvals, dtype=float)
    return float(np.trapezoid(pvals, times) / (times[-1] - times[0]))


def coherent_init(alpha: complex, n_fock: int, tol: float = 1e-8) -> np.ndarray:
    """Truncated coherent-state amplitudes, renormalized after truncation.

    Uses the standard sqrt(k!) normalization, alpha^k e^(-|alpha|^2/2)/sqrt(k!).
    """
    k = np.arange(n_fock)
    log_fact = np.cumsum(np.concatenate([[0.0], np.log(np.arange(1, n_fock))])) if n_fock > 1 else np.zeros(1)
    log_mag = -abs(alpha) ** 2 / 2.0 + k * math.log(abs(alpha)) - 0.5 * log_fact if alpha != 0 else None
    if alpha == 0:
        amps = np.zeros(n_fock, dtype=complex)
        amps[0] = 1.0
        return amps
    phases = np.exp(1j * k * np.angle(alpha))
    amps = np.exp(log_mag) * phases
    weight = float(np.sum(np.abs(amps) ** 2))
    if 1.0 - weight > tol:
        raise EnvironmentError_(
            f"truncation weight {1.0 - weight:.2e} exceeds {tol}; increase n_fock")
    return amps / math.sqrt(weight)

"""Trajectory post-processing: Bloch vectors, overlap diagnostics, frequency fits.

Qubit frequencies are fitted by matching the free precession of a Bloch
vector against (cos wt, -sin wt): the squared error is scanned on a coarse
grid inside the bracket first (the landscape has many local minima and one
sharp global one), then refined by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import TWOPI
from .solver import StateVector, Trajectory, site_shift

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class EvaluatorError(ValueError):
    pass


@dataclass
class BlochTrajectory:
    times: np.ndarray
    vectors: np.ndarray  # (n_times, ntr, 3)


@dataclass
class FrequencyFit:
    omega: float          # angular, rad/ns
    chi2_min: float
    bracket: tuple


def bloch_vectors(state: StateVector) -> np.ndarray:
    """(r^x, r^y, r^z) per transmon, tracing over all other degrees of freedom."""
    arr = state.coeffs.reshape([4] * state.nsites)
    out = np.zeros((state.ntr, 3))
    for i in range(state.ntr):
        axis = state.nres + i
        a0 = np.take(arr, 0, axis=axis).ravel()
        a1 = np.take(arr, 1, axis=axis).ravel()
        cross = np.sum(np.conj(a0) * a1)
        out[i, 0] = 2.0 * cross.real
        out[i, 1] = 2.0 * cross.imag
        out[i, 2] = float(np.sum(np.abs(a0) ** 2) - np.sum(np.abs(a1) ** 2))
    return out


def bloch_trajectory(traj: Trajectory) -> BlochTrajectory:
    vecs = np.zeros((len(traj), traj.ntr, 3))
    for n in range(len(traj)):
        vecs[n] = bloch_vectors(StateVector(traj.ntr, traj.nres, traj.states[n]))
    return BlochTrajectory(times=np.asarray(traj.times), vectors=vecs)


def overlap(psi1, psi2) -> float:
    """Global-phase-free overlap |<1|2>|^2 / (<1|1><2|2>)."""
    a = psi1.coeffs if isinstance(psi1, StateVector) else np.asarray(psi1)
    b = psi2.coeffs if isinstance(psi2, StateVector) else np.asarray(psi2)
    if a.shape != b.shape:
        raise EvaluatorError("states must have the same dimension")
    na, nb = np.vdot(a, a).real, np.vdot(b, b).real
    if na == 0.0 or nb == 0.0:
        raise EvaluatorError("overlap of a zero-norm state is undefined")
    return float(abs(np.vdot(a, b)) ** 2 / (na * nb))


def trajectory_error(traj1: Trajectory, traj2: Trajectory) -> float:
    """1 - mean overlap over matching snapshot grids."""
    if len(traj1) != len(traj2) or np.abs(np.asarray(traj1.times) - np.asarray(traj2.times)).max() > 1e-9:
        raise EvaluatorError("snapshot grids do not match")
    s = 0.0
    for n in range(len(traj1)):
        s += overlap(traj1.states[n], traj2.states[n])
    return 1.0 - s / len(traj1)


# ---------------------------------------------------------------------------
# frequency fitting
# ---------------------------------------------------------------------------

def chi_squared(omega, times, rx, ry) -> np.ndarray:
    """Squared error of both quadratures against (cos wt, -sin wt); vectorized in omega."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty(omega.size)
    chunk = max(1, int(2e6 // max(len(times), 1)))
    for lo in range(0, omega.size, chunk):
        w = omega[lo:lo + chunk, None]
        arg = w * times[None, :]
        out[lo:lo + chunk] = np.sum((rx[None, :] - np.cos(arg)) ** 2
                                    + (ry[None, :] + np.sin(arg)) ** 2, axis=1)
    return out if out.size > 1 else out[0]


def golden_section_minimize(f, a: float, b: float, rel_tol: float = 1e-9, max_iter: int = 200):
    """Golden-section search on [a, b]; returns (x_min, f(x_min))."""
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * (abs(a) + abs(b)) / 2.0:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 < f2 else (x2, f2)


def fit_qubit_frequency(times, rx, ry, bracket, coarse_step: float = TWOPI * 1e-4,
                        rel_tol: float = 1e-9) -> FrequencyFit:
    """Locate the sharp chi-squared minimum inside ``bracket`` (angular rad/ns)."""
    times = np.asarray(times, dtype=float)
    rx = np.asarray(rx, dtype=float)
    ry = np.asarray(ry, dtype=float)
    w_a, w_c = bracket
    if not w_a < w_c:
        raise EvaluatorError("bracket must satisfy w_a < w_c")
    n_grid = max(int(math.ceil((w_c - w_a) / coarse_step)) + 1, 5)
    grid = np.linspace(w_a, w_c, n_grid)
    vals = chi_squared(grid, times, rx, ry)
    j = int(np.argmin(vals))
    if j == 0 or j == n_grid - 1:
        raise EvaluatorError("no interior chi-squared minimum in the bracket")
    lo, hi = grid[j - 1], grid[j + 1]
    omega, chi2 = golden_section_minimize(lambda w: float(chi_squared(w, times, rx, ry)),
                                          lo, hi, rel_tol=rel_tol)
    return FrequencyFit(omega=float(omega), chi2_min=float(chi2), bracket=(float(lo), float(omega), float(hi)))


# ---------------------------------------------------------------------------
# observable error bounds
# ---------------------------------------------------------------------------

def observable_error_check(psi: StateVector, psi_ref: StateVector, obs: np.ndarray):
    """Error of <obs> between two states against its two distinguishability bounds.

    ``obs`` is a Hermitian matrix on the computational subspace, embedded
    with zeros elsewhere.  Returns (lhs, bound_inf, bound_var) and raises if
    either bound is violated beyond 1e-12.
    """
    obs = np.asarray(obs)
    if np.abs(obs - obs.conj().T).max() > 1e-12 * max(np.abs(obs).max(), 1.0):
        raise EvaluatorError("observable must be Hermitian")
    from .solver import computational_indices

    idx = computational_indices(psi.ntr, psi.nres)
    if obs.shape != (idx.size, idx.size):
        raise EvaluatorError(f"observable must be {idx.size}x{idx.size}")

    def expectations(state):
        v = state.coeffs[idx]
        w = obs @ v
        return float(np.vdot(v, w).real), float(np.vdot(w, w).real)

    ev, ev2 = expectations(psi)
    ev_ref, _ = expectations(psi_ref)
    lhs = abs(ev - ev_ref)
    ip = np.vdot(psi.coeffs, psi_ref.coeffs)
    delta = max(1.0 - abs(ip) ** 2, 0.0)
    norm2 = float(np.linalg.norm(obs, ord=2))
    var = max(ev2 - ev ** 2, 0.0)
    bound_inf = 2.0 * math.sqrt(delta) * norm2
    bound_var = 2.0 * math.sqrt(delta) * math.sqrt(var) * abs(ip) + 2.0 * delta * norm2
    if lhs > bound_inf + 1e-12 or lhs > bound_var + 1e-12:
        raise EvaluatorError(
            f"observable bound violated: lhs={lhs!r}, bounds=({bound_inf!r}, {bound_var!r})"
        )
    return lhs, bound_inf, bound_var


def write_bloch_csv(path, bloch: BlochTrajectory) -> None:
    """bloch.csv: header t,r0x,r0y,r0z,..., 12 significant digits."""
    ntr = bloch.vectors.shape[1]
    header = "t," + ",".join(f"r{i}{ax}" for i in range(ntr) for ax in "xyz")
    rows = [header]
    for n, t in enumerate(bloch.times):
        vals = [f"{t:.12g}"] + [f"{bloch.vectors[n, i, a]:.12g}" for i in range(ntr) for a in range(3)]
        rows.append(",".join(vals))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")

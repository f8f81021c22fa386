"""Quantum-operation representations and gate quality metrics.

Operations enter either as a single (possibly non-unitary) matrix M acting as
rho -> M rho M^dag, or as a list of Kraus operators.  Conversions between the
Kraus, Choi and Pauli-transfer pictures are mutually consistent; the metrics
cover average fidelity (closed form plus a Monte-Carlo oracle), unitarity,
the diamond distance (independent maximization and minimization algorithms,
a closed form for unitary pairs, and fidelity-based bounds) and an axis-angle
decomposition of near-unitary transfer matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .optimize import NmConfig, nelder_mead


class MetricsError(ValueError):
    pass


PAULI_1 = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@lru_cache(maxsize=8)
def pauli_basis(n: int):
    """Tensor-product Pauli basis, I/X/Y/Z per qubit, qubit 0 most significant."""
    mats = [np.array([[1.0]], dtype=complex)]
    for _ in range(n):
        mats = [np.kron(m, p) for m in mats for p in PAULI_1]
    return tuple(mats)


def _kraus_list(op) -> list:
    if isinstance(op, KrausOp):
        return list(op.ops)
    op = np.asarray(op, dtype=complex) if not isinstance(op, (list, tuple)) else op
    if isinstance(op, np.ndarray) and op.ndim == 2:
        return [op]
    return [np.asarray(e, dtype=complex) for e in op]


@dataclass
class KrausOp:
    """A completely positive map given by its Kraus operators."""

    ops: tuple

    def __post_init__(self):
        self.ops = tuple(np.asarray(e, dtype=complex) for e in self.ops)
        n = self.ops[0].shape[0]
        acc = sum(e.conj().T @ e for e in self.ops)
        top = np.linalg.eigvalsh(acc).max()
        if top > 1.0 + 1e-9:
            raise MetricsError(f"Kraus set is trace-increasing (max eigenvalue {top})")

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


@dataclass
class Ptm:
    """Real Pauli-transfer matrix, d = N^2."""

    g: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(round(math.log(self.g.shape[0], 4)))


@dataclass
class ChoiMatrix:
    j: np.ndarray

    def __post_init__(self):
        if np.abs(self.j - self.j.conj().T).max() > 1e-12 * max(np.abs(self.j).max(), 1.0):
            raise MetricsError("Choi matrix must be Hermitian")


@dataclass
class AxisAngle:
    phi: float
    axis: np.ndarray
    gamma: float


# ---------------------------------------------------------------------------
# representation conversions
# ---------------------------------------------------------------------------

def ptm_of(op) -> Ptm:
    """Pauli transfer matrix G_ij = Tr(P_i E(P_j)) / N of a Kraus map or matrix."""
    kraus = _kraus_list(op)
    nq = int(round(math.log2(kraus[0].shape[0])))
    basis = pauli_basis(nq)
    d = len(basis)
    dim = kraus[0].shape[0]
    g = np.zeros((d, d), dtype=complex)
    for j, pj in enumerate(basis):
        image = sum(e @ pj @ e.conj().T for e in kraus)
        for i, pi in enumerate(basis):
            g[i, j] = np.trace(pi @ image) / dim
    if np.abs(g.imag).max() > 1e-10:
        raise MetricsError(f"transfer matrix has complex residue {np.abs(g.imag).max():.2e}")
    return Ptm(g=g.real)


def choi_of(op) -> ChoiMatrix:
    """Choi matrix J = (1/N) sum_ij |i><j| (x) E(|i><j|)."""
    kraus = _kraus_list(op)
    n = kraus[0].shape[0]
    j = np.zeros((n * n, n * n), dtype=complex)
    for e in kraus:
        w = e.T.reshape(-1)  # components w[(i,k)] = E[k,i]
        j += np.outer(w, w.conj())
    return ChoiMatrix(j=j / n)


def kraus_of(choi: ChoiMatrix, tol: float = 1e-10) -> KrausOp:
    """Minimal Kraus set from a PSD Choi matrix (error lists negative eigenvalues)."""
    j = choi.j if isinstance(choi, ChoiMatrix) else np.asarray(choi)
    n = int(round(math.sqrt(j.shape[0])))
    w, v = np.linalg.eigh(j)
    negative = w[w < -tol]
    if negative.size:
        raise MetricsError(f"Choi matrix is not PSD; negative eigenvalues {negative}")
    ops = []
    for k in range(w.size - 1, -1, -1):
        if w[k] <= tol:
            break
        ops.append(math.sqrt(n * w[k]) * v[:, k].reshape(n, n).T)
    return KrausOp(ops=tuple(ops))


def choi_rank(choi: ChoiMatrix, tol: float = 1e-10) -> int:
    w = np.linalg.eigvalsh(choi.j if isinstance(choi, ChoiMatrix) else choi)
    return int(np.sum(np.abs(w) > tol))


def choi_to_ptm(choi: ChoiMatrix) -> Ptm:
    """Direct basis change (valid also for non-PSD, Hermiticity-preserving maps)."""
    j = choi.j if isinstance(choi, ChoiMatrix) else np.asarray(choi)
    n = int(round(math.sqrt(j.shape[0])))
    nq = int(round(math.log2(n)))
    basis = pauli_basis(nq)
    jt = j.reshape(n, n, n, n)  # [(i,k),(j,l)] -> E(|i><j|)[k,l]
    g = np.zeros((n * n, n * n), dtype=complex)
    for b, pb in enumerate(basis):
        image = np.einsum("ij,ikjl->kl", pb, jt)
        for a, pa in enumerate(basis):
            g[a, b] = np.trace(pa @ image)
    if np.abs(g.imag).max() > 1e-10:
        raise MetricsError("Choi matrix does not preserve Hermiticity")
    return Ptm(g=g.real)


def ptm_to_choi(ptm: Ptm) -> ChoiMatrix:
    g = ptm.g if isinstance(ptm, Ptm) else np.asarray(ptm)
    d = g.shape[0]
    n = int(round(math.sqrt(d)))
    nq = int(round(math.log2(n)))
    basis = pauli_basis(nq)
    j = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            if g[a, b] == 0.0:
                continue
            # contribution of E(P_b/N -> P_a): J += g_ab (P_b^T (x) P_a) / N
            j += g[a, b] * np.kron(basis[b].T, basis[a]) / n
    return ChoiMatrix(j=j / n)


def vec_state(rho_or_psi) -> np.ndarray:
    """Pauli-basis coefficient vector of a density matrix (or pure state)."""
    x = np.asarray(rho_or_psi, dtype=complex)
    rho = np.outer(x, x.conj()) if x.ndim == 1 else x
    n = rho.shape[0]
    basis = pauli_basis(int(round(math.log2(n))))
    return np.array([np.trace(p @ rho).real / math.sqrt(n) for p in basis])


def povm_z_vectors(n_qubits: int) -> np.ndarray:
    """Row vectors <<E_J| of the computational-basis projectors."""
    n = 2 ** n_qubits
    out = np.zeros((n, n * n))
    for j in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[j, j] = 1.0
        out[j] = vec_state(e)
    return out


# ---------------------------------------------------------------------------
# fidelity and unitarity
# ---------------------------------------------------------------------------

def avg_fidelity(m: np.ndarray, u: np.ndarray) -> float:
    """(|Tr(M U^dag)|^2 + Tr(M^dag M)) / (N(N+1))."""
    m = np.asarray(m, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = m.shape[0]
    return float((abs(np.trace(m @ u.conj().T)) ** 2 + np.trace(m.conj().T @ m).real)
                 / (n * (n + 1)))


def _random_states(n: int, samples: int, rng) -> np.ndarray:
    z = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def avg_fidelity_mc(m: np.ndarray, u: np.ndarray, samples: int = 10 ** 6,
                    seed: int | None = None) -> float:
    """Monte-Carlo estimate of the average fidelity over random pure states."""
    rng = np.random.default_rng(seed)
    w = np.asarray(m, dtype=complex) @ np.asarray(u, dtype=complex).conj().T
    total = 0.0
    chunk = 200_000
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        psi = _random_states(w.shape[0], k, rng)
        amps = np.einsum("si,ij,sj->s", psi.conj(), w, psi)
        total += float(np.sum(np.abs(amps) ** 2))
        done += k
    return total / samples


def unitarity(m: np.ndarray, samples: int = 10 ** 5, seed: int | None = None) -> float:
    """Average output purity of the identity-subtracted map, by state sampling."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    b = m @ m.conj().T
    tr_b = np.trace(b).real
    tr_b2 = np.trace(b @ b).real
    total = 0.0
    chunk = 50_000
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        psi = _random_states(n, k, rng)
        v = psi @ m.T  # rows are M|psi>
        vnorm2 = np.sum(np.abs(v) ** 2, axis=1)
        vbv = np.einsum("si,ij,sj->s", v.conj(), b, v).real
        t = vnorm2 - tr_b / n
        frob2 = vnorm2 ** 2 - (2.0 / n) * vbv + tr_b2 / n ** 2
        total += float(np.sum(frob2 - 2.0 * t ** 2 / math.sqrt(n) + t ** 2))
        done += k
    return total / samples * n / (n - 1)


# ---------------------------------------------------------------------------
# diamond distance
# ---------------------------------------------------------------------------

def _diamond_objective(x: np.ndarray, a_mat: np.ndarray, b_mat: np.ndarray) -> float:
    """f(x) = 1/2 sqrt((<x|W^dag W (x) 1|x> + 1)^2 - 4 |<x|W (x) 1|x>|^2)."""
    xa = np.vdot(x, a_mat @ x).real
    xb = np.vdot(x, b_mat @ x)
    val = (xa + 1.0) ** 2 - 4.0 * abs(xb) ** 2
    return 0.5 * math.sqrt(max(val, 0.0))


def _ascend(x, a_mat, b_mat, iters=300, step0=0.2):
    """Projected gradient ascent on the unit sphere of the doubled space."""
    x = x / np.linalg.norm(x)
    best = _diamond_objective(x, a_mat, b_mat)
    step = step0
    for _ in range(iters):
        xa = np.vdot(x, a_mat @ x).real
        xb = np.vdot(x, b_mat @ x)
        grad = 2.0 * (xa + 1.0) * (a_mat @ x) - 4.0 * (np.conj(xb) * (b_mat @ x)
                                                       + xb * (b_mat.conj().T @ x))
        grad -= x * np.vdot(x, grad).real
        gn = np.linalg.norm(grad)
        if gn < 1e-14:
            break
        cand = x + step * grad / gn
        cand /= np.linalg.norm(cand)
        val = _diamond_objective(cand, a_mat, b_mat)
        if val >= best:
            x, best = cand, val
            step = min(step * 1.3, 1.0)
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return x, best


def _hull_distance(points: np.ndarray):
    """Distance of the origin to the convex hull of complex points (0 if inside)."""
    args = np.sort(np.angle(points) % (2.0 * math.pi))
    gaps = np.diff(np.concatenate([args, [args[0] + 2.0 * math.pi]]))
    if args.size >= 2 and gaps.max() <= math.pi + 1e-12:
        return 0.0
    best = np.abs(points).min()
    for i in range(points.size):
        for k in range(points.size):
            if i == k:
                continue
            a, b = points[i], points[k]
            d = b - a
            if abs(d) < 1e-15:
                continue
            t = min(max(-(a * np.conj(d)).real / abs(d) ** 2, 0.0), 1.0)
            best = min(best, abs(a + t * d))
    return best


def diamond_max(m: np.ndarray, u: np.ndarray, n_starts: int = 64,
                seed: int = 7, iters: int = 400) -> float:
    """Lower estimate of the diamond distance by pure-state maximization.

    Starts include random states, the maximally entangled state, eigenvector
    pairs of W = M U^dag and (for near-normal W) the convex-hull optimum;
    each is polished by projected gradient ascent.
    """
    m = np.asarray(m, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = m.shape[0]
    w = m @ u.conj().T
    a_mat = np.kron(w.conj().T @ w, np.eye(n))
    b_mat = np.kron(w, np.eye(n))
    rng = np.random.default_rng(seed)
    dim = n * n
    starts = [_random_states(dim, 1, rng)[0] for _ in range(n_starts)]
    ent = np.zeros(dim, dtype=complex)
    for j in range(n):
        ent[j * n + j] = 1.0 / math.sqrt(n)
    starts.append(ent)
    evals, evecs = np.linalg.eig(w)
    normal = np.abs(w @ w.conj().T - w.conj().T @ w).max() < 1e-9 * max(np.abs(w).max() ** 2, 1e-30)
    for i in range(n):
        for k in range(i + 1, n):
            x = np.zeros(dim, dtype=complex)
            x += np.kron(evecs[:, i], _unit(n, 0)) / math.sqrt(2.0)
            x += np.kron(evecs[:, k], _unit(n, 1)) / math.sqrt(2.0)
            starts.append(x / np.linalg.norm(x))
    if normal:
        # optimal convex combination of eigenvector blocks
        pts = evals
        d0 = _hull_distance(pts)
        probs = _hull_weights(pts, d0)
        x = np.zeros(dim, dtype=complex)
        for j in range(n):
            x += math.sqrt(max(probs[j], 0.0)) * np.kron(evecs[:, j], _unit(n, j % n))
        nx = np.linalg.norm(x)
        if nx > 0:
            starts.append(x / nx)
    best = 0.0
    for x0 in starts:
        _, val = _ascend(np.asarray(x0, dtype=complex), a_mat, b_mat, iters=iters)
        best = max(best, val)
    return best


def _unit(n, j):
    e = np.zeros(n, dtype=complex)
    e[j] = 1.0
    return e


def _hull_weights(points: np.ndarray, dist: float) -> np.ndarray:
    """Convex weights realizing the hull point closest to the origin."""
    n = points.size
    if dist == 0.0:
        # solve sum p_k lambda_k = 0 with simplex constraints by least squares
        a = np.vstack([points.real, points.imag, np.ones(n)])
        target = np.array([0.0, 0.0, 1.0])
        p, *_ = np.linalg.lstsq(a, target, rcond=None)
        p = np.clip(p, 0.0, None)
        s = p.sum()
        return p / s if s > 0 else np.full(n, 1.0 / n)
    best, pair = None, (0, 0)
    for i in range(n):
        for k in range(n):
            if i == k:
                continue
            a, b = points[i], points[k]
            d = b - a
            t = 0.0 if abs(d) < 1e-15 else min(max(-(a * np.conj(d)).real / abs(d) ** 2, 0.0), 1.0)
            val = abs(a + t * d)
            if best is None or val < best:
                best, pair, tbest = val, (i, k), t
    p = np.zeros(n)
    p[pair[0]] = 1.0 - tbest
    p[pair[1]] += tbest
    return p


def diamond_min(m: np.ndarray, u: np.ndarray, n_samples: int = 10 ** 4,
                seed: int = 11, refine_evals: int = 4000) -> float:
    """Upper estimate of the diamond distance over generalized Kraus pairings.

    Sampling over random invertible 2x2 recombination matrices S, then a
    simplex refinement of the eight real parameters of the best sample.
    Falls back to the closed form when M U^dag is proportional to identity.
    """
    m = np.asarray(m, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = m.shape[0]
    w = m @ u.conj().T
    off = w - (np.trace(w) / n) * np.eye(n)
    if np.abs(off).max() < 1e-12:
        gamma = np.trace(w) / n
        return abs(1.0 - abs(gamma) ** 2) / 2.0
    wdw = w.conj().T @ w
    eye = np.eye(n)

    def value(svec):
        s = (svec[:4] + 1j * svec[4:]).reshape(2, 2)
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
        if abs(det) < 1e-12:
            return np.inf
        r = s @ s.conj().T
        t = np.linalg.inv(r)
        a_side = t[0, 0] * wdw + t[0, 1] * w.conj().T + t[1, 0] * w + t[1, 1] * eye
        b_side = r[0, 0] * wdw - r[0, 1] * w.conj().T - r[1, 0] * w + r[1, 1] * eye
        na = scipy.linalg.eigvalsh(a_side).max()
        nb = scipy.linalg.eigvalsh(b_side).max()
        return 0.5 * math.sqrt(max(na, 0.0) * max(nb, 0.0))

    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((n_samples, 8))
    best_val, best_s = np.inf, None
    for svec in samples:
        val = value(svec)
        if val < best_val:
            best_val, best_s = val, svec
    scales = np.full(8, 0.1)
    x = best_s
    for _ in range(3):
        res = nelder_mead(value, x, NmConfig(scales=scales, epsilon=1e-12,
                                             max_evals=refine_evals))
        x = res.x_best
        scales = scales / 10.0
        best_val = min(best_val, res.f_best)
    return float(best_val)


def diamond_unitary(m: np.ndarray, u: np.ndarray) -> float:
    """Closed-form diamond distance when both matrices are unitary."""
    m = np.asarray(m, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = m.shape[0]
    for mat, name in ((m, "M"), (u, "U")):
        if np.abs(mat @ mat.conj().T - np.eye(n)).max() > 1e-9:
            raise MetricsError(f"{name} is not unitary; use the max/min algorithms")
    lam = np.linalg.eigvals(m @ u.conj().T)
    args = np.sort(np.angle(lam) % (2.0 * math.pi))
    gaps = np.diff(np.concatenate([args, [args[0] + 2.0 * math.pi]]))
    if n >= 3 and gaps.max() <= math.pi + 1e-14:
        return 1.0
    best = 0.0
    for i in range(n):
        for k in range(i + 1, n):
            best = max(best, abs(lam[i] - lam[k]) / 2.0)
    return float(min(best, 1.0))


def diamond_bounds(m: np.ndarray, u: np.ndarray):
    """(lb, pauli_lb, ub): fidelity-based bounds, lb valid for trace-decreasing maps."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    f = avg_fidelity(m, u)
    pauli_lb = (n + 1) * (1.0 - f) / n
    lb = pauli_lb - (n + 2) / (2.0 * n) * (1.0 - np.trace(m.conj().T @ m).real / n)
    ub = math.sqrt(n * (n + 1) * max(1.0 - f, 0.0))
    return lb, pauli_lb, ub


# ---------------------------------------------------------------------------
# axis-angle decomposition
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4)
def super_commutator(n_qubits: int) -> np.ndarray:
    """s[k, j, i] = Tr([P_k, P_j] P_i) / (2 N i): the commutator pattern tensor."""
    basis = pauli_basis(n_qubits)
    d = len(basis)
    n = 2 ** n_qubits
    s = np.zeros((d, d, d))
    for k in range(d):
        for j in range(d):
            comm = basis[k] @ basis[j] - basis[j] @ basis[k]
            if np.abs(comm).max() < 1e-12:
                continue
            for i in range(d):
                val = np.trace(comm @ basis[i]) / (2j * n)
                s[k, j, i] = val.real
    return s


def real_matrix_log(g: np.ndarray, pair_tol: float = 1e-8) -> np.ndarray:
    """Principal matrix logarithm of a real matrix, pairing -1 eigenvalues.

    Eigenvalues within ``pair_tol`` of -1 are grouped into conjugate-branch
    pairs (matched greedily by eigenvector overlap); an odd leftover or a
    singular matrix is an error.
    """
    g = np.asarray(g, dtype=float)
    lam, v = np.linalg.eig(g)
    if np.abs(lam).min() < 1e-12:
        raise MetricsError("transfer matrix is singular; no matrix logarithm")
    neg = [k for k in range(lam.size)
           if abs(lam[k].imag) < pair_tol and lam[k].real < 0
           and abs(lam[k] + 1.0) < pair_tol]
    if len(neg) % 2 != 0:
        raise MetricsError(f"odd number of eigenvalues at -1 ({len(neg)}); cannot take a real log")
    lam = lam.astype(complex)
    v = v.astype(complex)
    remaining = list(neg)
    while remaining:
        i = remaining.pop(0)
        overlaps = [abs(np.vdot(v[:, i], v[:, k])) for k in remaining]
        k = remaining.pop(int(np.argmax(overlaps)))
        vi, vk = v[:, i].copy(), v[:, k].copy()
        v[:, i] = (vi + 1j * vk) / math.sqrt(2.0)
        v[:, k] = (vi - 1j * vk) / math.sqrt(2.0)
        lam[i] = 1j * math.pi
        lam[k] = -1j * math.pi
    log_lam = np.where(np.imag(lam) == 0.0, np.log(lam.real + 0j), lam)
    # entries already replaced by +-i pi keep their value; others take the principal log
    for k in range(lam.size):
        if k in neg:
            continue
        log_lam[k] = np.log(lam[k])
    l_mat = v @ np.diag(log_lam) @ np.linalg.inv(v)
    if np.abs(l_mat.imag).max() > 1e-8:
        raise MetricsError(f"matrix logarithm has imaginary residue {np.abs(l_mat.imag).max():.2e}")
    return l_mat.real


def hamiltonian_ptm(h_coeffs: np.ndarray, s_tensor: np.ndarray) -> np.ndarray:
    """Transfer matrix of the commutator map -i[H, .] for H = sum h_k P_k / 2."""
    return np.einsum("k,kji->ij", h_coeffs, s_tensor)


def axis_angle(ptm, target_ptm=None, refine_evals: int = 2000) -> AxisAngle:
    """Rotation angle and Pauli axis of a transfer matrix via the matrix log.

    The log is projected onto the commutator pattern by least squares; the
    decomposition error gamma is ||G - exp(L_H)||_F.  With ``target_ptm``
    given, the coefficients are refined against the combined objective
    ||G - exp(L_H)||_1 + 10 ||L_U - L_H||_F^2.
    """
    g = ptm.g if isinstance(ptm, Ptm) else np.asarray(ptm)
    d = g.shape[0]
    nq = int(round(math.log(d, 4)))
    s = super_commutator(nq)
    l_mat = real_matrix_log(g)
    weights = np.einsum("kji->k", np.abs(s))
    h = np.zeros(d)
    nonzero = weights > 0
    h[nonzero] = np.einsum("ij,kji->k", l_mat, s)[nonzero] / weights[nonzero]

    def gamma_of(hvec):
        return float(np.linalg.norm(g - scipy.linalg.expm(hamiltonian_ptm(hvec, s)), ord="fro"))

    if target_ptm is not None:
        gt = target_ptm.g if isinstance(target_ptm, Ptm) else np.asarray(target_ptm)
        l_u = real_matrix_log(gt)

        def objective(hvec):
            lh = hamiltonian_ptm(hvec, s)
            return (np.abs(g - scipy.linalg.expm(lh)).sum()
                    + 10.0 * np.linalg.norm(l_u - lh, ord="fro") ** 2)

        res = nelder_mead(objective, h, NmConfig(scales=np.full(d, 0.02),
                                                 epsilon=1e-10, max_evals=refine_evals))
        h = res.x_best
    phi = float(np.linalg.norm(h))
    axis = h / phi if phi > 0 else np.zeros(d)
    return AxisAngle(phi=phi, axis=axis, gamma=gamma_of(h))


# ---------------------------------------------------------------------------
# repeated-gate prediction
# ---------------------------------------------------------------------------

def predict_repeated(ptm_prep, ptm_gate, r: int, povm_vecs: np.ndarray,
                     rho_vec: np.ndarray):
    """Outcome distribution <<E_J| G^r G_prep |rho>>, clipped to [0, 1].

    ``ptm_prep`` is a list applied right-to-left (first element acts first).
    Returns (probabilities, total_before_clipping).
    """
    povm_vecs = np.asarray(povm_vecs, dtype=float)
    rho_vec = np.asarray(rho_vec, dtype=float)
    d = rho_vec.size
    ident = np.zeros(d)
    ident[0] = math.sqrt(d ** 0.5)  # <<1| coefficients: Tr(P_0/sqrt(N) * 1) = sqrt(N)
    completeness = povm_vecs.sum(axis=0)
    if np.abs(completeness - ident).max() > 1e-9:
        raise MetricsError("POVM vectors do not sum to the identity")
    state = rho_vec.copy()
    for g in ptm_prep:
        gm = g.g if isinstance(g, Ptm) else np.asarray(g)
        if gm.shape != (d, d):
            raise MetricsError("dimension mismatch in preparation gates")
        state = gm @ state
    gm = ptm_gate.g if isinstance(ptm_gate, Ptm) else np.asarray(ptm_gate)
    if gm.shape != (d, d):
        raise MetricsError("dimension mismatch in the repeated gate")
    for _ in range(r):
        state = gm @ state
    p = povm_vecs @ state
    total = float(p.sum())
    return np.clip(p, 0.0, 1.0), total


def statistical_distance(p, q) -> float:
    """Total variation distance (1/2) sum |p - q|."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise MetricsError("distributions must have the same support")
    return 0.5 * float(np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# random test-ops
# ---------------------------------------------------------------------------

def random_unitary(n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_trace_decreasing(n: int, rng, strength: float = 0.1) -> np.ndarray:
    """Random contraction close to a unitary (singular values clipped to <= 1)."""
    m = random_unitary(n, rng) + strength * (rng.standard_normal((n, n))
                                             + 1j * rng.standard_normal((n, n)))
    u, s, vh = np.linalg.svd(m)
    return u @ np.diag(np.clip(s / max(s.max(), 1.0), 0.0, 1.0)) @ vh

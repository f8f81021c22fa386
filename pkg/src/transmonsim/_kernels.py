"""Compiled inner loops for the product-formula state updates.

All kernels operate on the packed amplitude array indexed by the KM integer
(two bits per site, resonators in the high group).  The three 4x4 transform
strategies enumerate the same disjoint index groups in different ways:

* strategy 0 loops over every KM and branches on the two site bits,
* strategy 1 loops over dim/4 reduced indices and splices the bits back in,
* strategy 2 runs nested loops over the high and low index parts.

The per-group arithmetic is shared (``_update_group``), with a fixed
operation order, so all strategies and thread counts produce bit-identical
amplitudes.  Parallel variants split the disjoint groups with ``prange``;
no two iterations touch the same amplitude and there are no reductions.
"""

import numpy as np
from numba import njit, prange

TWOPI = 6.283185307179586


@njit(inline="always")
def _update_group(psi, base, inc, u):
    a0 = psi[base]
    a1 = psi[base + inc]
    a2 = psi[base + 2 * inc]
    a3 = psi[base + 3 * inc]
    psi[base] = u[0, 0] * a0 + u[0, 1] * a1 + u[0, 2] * a2 + u[0, 3] * a3
    psi[base + inc] = u[1, 0] * a0 + u[1, 1] * a1 + u[1, 2] * a2 + u[1, 3] * a3
    psi[base + 2 * inc] = u[2, 0] * a0 + u[2, 1] * a1 + u[2, 2] * a2 + u[2, 3] * a3
    psi[base + 3 * inc] = u[3, 0] * a0 + u[3, 1] * a1 + u[3, 2] * a2 + u[3, 3] * a3


@njit(cache=True)
def site_transform_s0(psi, u, shift):
    dim = psi.size
    for km in range(dim):
        if (km >> shift) & 3 == 0:
            _update_group(psi, km, 1 << shift, u)


@njit(cache=True)
def site_transform_s1(psi, u, shift):
    dim = psi.size
    inc = 1 << shift
    rmask = inc - 1
    for red in range(dim >> 2):
        km = ((red & ~rmask) << 2) | (red & rmask)
        _update_group(psi, km, inc, u)


@njit(cache=True)
def site_transform_s2(psi, u, shift):
    dim = psi.size
    inc = 1 << shift
    incl = inc << 2
    for hi in range(dim // incl):
        for lo in range(inc):
            _update_group(psi, hi * incl + lo, inc, u)


@njit(cache=True, parallel=True)
def site_transform_s0_mt(psi, u, shift):
    dim = psi.size
    for km in prange(dim):
        if (km >> shift) & 3 == 0:
            _update_group(psi, km, 1 << shift, u)


@njit(cache=True, parallel=True)
def site_transform_s1_mt(psi, u, shift):
    dim = psi.size
    inc = 1 << shift
    rmask = inc - 1
    for red in prange(dim >> 2):
        km = ((red & ~rmask) << 2) | (red & rmask)
        _update_group(psi, km, inc, u)


@njit(cache=True, parallel=True)
def site_transform_s2_mt(psi, u, shift):
    dim = psi.size
    inc = 1 << shift
    incl = inc << 2
    for hi in prange(dim // incl):
        for lo in range(inc):
            _update_group(psi, hi * incl + lo, inc, u)


@njit(cache=True)
def phase_multiply(psi, phase):
    for i in range(psi.size):
        psi[i] = psi[i] * phase[i]


@njit(cache=True, parallel=True)
def phase_multiply_mt(psi, phase):
    for i in prange(psi.size):
        psi[i] = psi[i] * phase[i]


@njit(inline="always")
def _env_gauss(tl, amp, t_x, sigma):
    off = np.exp(-t_x * t_x / (8.0 * sigma * sigma))
    x = (tl - 0.5 * t_x) / sigma
    return amp * (np.exp(-0.5 * x * x) - off) / (1.0 - off)


@njit(inline="always")
def _env_gaussdot(tl, amp_eff, t_x, sigma):
    off = np.exp(-t_x * t_x / (8.0 * sigma * sigma))
    x = (tl - 0.5 * t_x) / sigma
    return -amp_eff * (x / sigma) * np.exp(-0.5 * x * x) / (1.0 - off)


@njit(inline="always")
def _env_flattop(tl, amp, t_cr, t_rise):
    if tl < t_rise:
        return _env_gauss(tl, amp, 2.0 * t_rise, t_rise / 3.0)
    if tl <= t_rise + t_cr:
        return amp
    return _env_gauss(tl - t_cr, amp, 2.0 * t_rise, t_rise / 3.0)


@njit(cache=True)
def segment_value(kind, tl, amp, t_env, extra):
    """Envelope value of one segment at local time tl (0 outside [0, span])."""
    if kind == 0:
        return _env_gauss(tl, amp, t_env, extra)
    if kind == 1:
        return _env_gaussdot(tl, amp, t_env, extra)
    if kind == 2:
        return _env_flattop(tl, amp, t_env, extra)
    return 0.0


@njit(cache=True)
def eval_drives(t, seg_t0, seg_t1, seg_res, seg_site, seg_kind,
                seg_f, seg_phase, seg_amp, seg_env_t, seg_extra, ng, eps):
    """Accumulate n_g(t) / eps(t) per site from all segments active at absolute time t."""
    ng[:] = 0.0
    eps[:] = 0.0
    any_drive = False
    for s in range(seg_t0.size):
        if seg_t0[s] <= t < seg_t1[s]:
            env = segment_value(seg_kind[s], t - seg_t0[s], seg_amp[s], seg_env_t[s], seg_extra[s])
            if env == 0.0:
                continue
            val = env * np.cos(TWOPI * seg_f[s] * t - seg_phase[s])
            if seg_res[s]:
                eps[seg_site[s]] += val
            else:
                ng[seg_site[s]] += val
            any_drive = True
    return any_drive


@njit(inline="always")
def _lambda_phase_driven(psi, tau, lam_static, lam_site, coef, shifts, i):
    lam = lam_static[i]
    for s in range(shifts.size):
        c = coef[s]
        if c != 0.0:
            lam += c * lam_site[s, (i >> shifts[s]) & 3]
    psi[i] = psi[i] * np.exp(-1j * tau * lam)


@njit(cache=True)
def lambda_phase_driven(psi, tau, lam_static, lam_site, coef, shifts):
    """psi *= exp(-i tau Lambda) with the drive-dependent diagonal rebuilt on the fly."""
    for i in range(psi.size):
        _lambda_phase_driven(psi, tau, lam_static, lam_site, coef, shifts, i)


@njit(cache=True, parallel=True)
def lambda_phase_driven_mt(psi, tau, lam_static, lam_site, coef, shifts):
    for i in prange(psi.size):
        _lambda_phase_driven(psi, tau, lam_static, lam_site, coef, shifts, i)


@njit(cache=True)
def evolve_kernel(psi, t_start, tau, n_steps, strategy,
                  phase_h0_half, phase_w_static, lam_static,
                  v_site, vdag_site, shifts, lam_site, drive_coef_scale, site_is_res,
                  seg_t0, seg_t1, seg_res, seg_site, seg_kind,
                  seg_f, seg_phase, seg_amp, seg_env_t, seg_extra,
                  snap_steps, out):
    """Run n_steps second-order product-formula steps, storing snapshots.

    ``snap_steps`` holds sorted step counts (0 = initial state) at which a
    copy of psi is written to ``out``.  Drives are evaluated at the interval
    midpoints t_start + (step + 1/2) tau.
    """
    nsites = shifts.size
    ntr = 0
    for s in range(nsites):
        if not site_is_res[s]:
            ntr += 1
    nres = nsites - ntr
    ng = np.zeros(ntr)
    eps = np.zeros(nres)
    coef = np.zeros(nsites)
    ptr = 0
    if ptr < snap_steps.size and snap_steps[ptr] == 0:
        out[ptr] = psi
        ptr += 1
    for step in range(n_steps):
        t_mid = t_start + tau * step + 0.5 * tau
        any_drive = eval_drives(t_mid, seg_t0, seg_t1, seg_res, seg_site, seg_kind,
                                seg_f, seg_phase, seg_amp, seg_env_t, seg_extra, ng, eps)
        phase_multiply(psi, phase_h0_half)
        if strategy == 0:
            for s in range(nsites - 1, -1, -1):
                site_transform_s0(psi, vdag_site[s], shifts[s])
        elif strategy == 1:
            for s in range(nsites - 1, -1, -1):
                site_transform_s1(psi, vdag_site[s], shifts[s])
        else:
            for s in range(nsites - 1, -1, -1):
                site_transform_s2(psi, vdag_site[s], shifts[s])
        if any_drive:
            for s in range(nsites):
                if site_is_res[s]:
                    coef[s] = drive_coef_scale[s] * eps[s]
                else:
                    coef[s] = drive_coef_scale[s] * ng[s - nres]
            lambda_phase_driven(psi, tau, lam_static, lam_site, coef, shifts)
        else:
            phase_multiply(psi, phase_w_static)
        if strategy == 0:
            for s in range(nsites):
                site_transform_s0(psi, v_site[s], shifts[s])
        elif strategy == 1:
            for s in range(nsites):
                site_transform_s1(psi, v_site[s], shifts[s])
        else:
            for s in range(nsites):
                site_transform_s2(psi, v_site[s], shifts[s])
        phase_multiply(psi, phase_h0_half)
        if ptr < snap_steps.size and snap_steps[ptr] == step + 1:
            out[ptr] = psi
            ptr += 1


@njit(cache=True)
def evolve_kernel_mt(psi, t_start, tau, n_steps, strategy,
                     phase_h0_half, phase_w_static, lam_static,
                     v_site, vdag_site, shifts, lam_site, drive_coef_scale, site_is_res,
                     seg_t0, seg_t1, seg_res, seg_site, seg_kind,
                     seg_f, seg_phase, seg_amp, seg_env_t, seg_extra,
                     snap_steps, out):
    """Multi-threaded twin of evolve_kernel (identical arithmetic per group)."""
    nsites = shifts.size
    ntr = 0
    for s in range(nsites):
        if not site_is_res[s]:
            ntr += 1
    nres = nsites - ntr
    ng = np.zeros(ntr)
    eps = np.zeros(nres)
    coef = np.zeros(nsites)
    ptr = 0
    if ptr < snap_steps.size and snap_steps[ptr] == 0:
        out[ptr] = psi
        ptr += 1
    for step in range(n_steps):
        t_mid = t_start + tau * step + 0.5 * tau
        any_drive = eval_drives(t_mid, seg_t0, seg_t1, seg_res, seg_site, seg_kind,
                                seg_f, seg_phase, seg_amp, seg_env_t, seg_extra, ng, eps)
        phase_multiply_mt(psi, phase_h0_half)
        if strategy == 0:
            for s in range(nsites - 1, -1, -1):
                site_transform_s0_mt(psi, vdag_site[s], shifts[s])
        elif strategy == 1:
            for s in range(nsites - 1, -1, -1):
                site_transform_s1_mt(psi, vdag_site[s], shifts[s])
        else:
            for s in range(nsites - 1, -1, -1):
                site_transform_s2_mt(psi, vdag_site[s], shifts[s])
        if any_drive:
            for s in range(nsites):
                if site_is_res[s]:
                    coef[s] = drive_coef_scale[s] * eps[s]
                else:
                    coef[s] = drive_coef_scale[s] * ng[s - nres]
            lambda_phase_driven_mt(psi, tau, lam_static, lam_site, coef, shifts)
        else:
            phase_multiply_mt(psi, phase_w_static)
        if strategy == 0:
            for s in range(nsites):
                site_transform_s0_mt(psi, v_site[s], shifts[s])
        elif strategy == 1:
            for s in range(nsites):
                site_transform_s1_mt(psi, v_site[s], shifts[s])
        else:
            for s in range(nsites):
                site_transform_s2_mt(psi, v_site[s], shifts[s])
        phase_multiply_mt(psi, phase_h0_half)
        if ptr < snap_steps.size and snap_steps[ptr] == step + 1:
            out[ptr] = psi
            ptr += 1

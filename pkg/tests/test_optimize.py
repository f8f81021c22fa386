import math

import numpy as np
import pytest

from transmonsim import optimize as op
from transmonsim import pulses as pl
from transmonsim.device import TWOPI, make_device
from transmonsim.metrics import random_unitary


class TestDistance:
    def test_equal_matrices(self, rng):
        u = random_unitary(4, rng)
        delta, z = op.distance(u, u)
        assert delta == pytest.approx(0.0, abs=1e-24)
        assert z == pytest.approx(1.0)

    def test_global_phase_removed(self, rng):
        u = random_unitary(2, rng)
        for phi in (0.4, 1.7, 3.0):
            delta, _ = op.distance(np.exp(1j * phi) * u, u)
            assert delta == pytest.approx(0.0, abs=1e-24)

    def test_phase_grid_oracle(self, rng):
        # brute-force minimum over 3600 gridded phases
        for _ in range(10):
            m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            u = random_unitary(4, rng)
            delta, _ = op.distance(m, u)
            phis = np.linspace(0.0, 2 * math.pi, 3600, endpoint=False)
            brute = min(np.linalg.norm(m - np.exp(1j * p) * u) ** 2 for p in phis)
            assert delta <= brute + 1e-6
            assert delta == pytest.approx(brute, abs=1e-5)
            assert delta <= np.linalg.norm(m - u) ** 2 + 1e-12

    def test_zero_trace_fallback(self):
        m = np.diag([1.0, -1.0]).astype(complex)
        delta, z = op.distance(m, np.array([[0, 1], [1, 0]], dtype=complex))
        assert z == 1.0


class TestNelderMead:
    def test_convex_bowl(self):
        res = op.nelder_mead(lambda x: float(np.sum(x ** 2)), [1.0, 1.0],
                             op.NmConfig(scales=[0.5, 0.5], epsilon=1e-10, max_evals=500))
        assert np.linalg.norm(res.x_best) <= 1e-3

    def test_rosenbrock(self):
        def rosen(x):
            return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)

        res = op.nelder_mead(rosen, [-1.2, 1.0],
                             op.NmConfig(scales=[0.1, 0.1], epsilon=1e-12, max_evals=400))
        assert res.f_best < 1e-6

    def test_termination_rule(self):
        res = op.nelder_mead(lambda x: float(np.sum(x ** 2)) + 1.0, [2.0, -1.0],
                             op.NmConfig(scales=[0.3, 0.3], epsilon=1e-4, max_evals=10 ** 4))
        assert res.delta < 1e-4

    def test_ladder_never_accepts_worse(self):
        # outside of shrink steps the simplex maximum must not increase
        def f(x):
            return float(np.sum(x ** 2) + 0.3 * np.sin(5 * x[0]))

        res = op.nelder_mead(f, [1.3, -0.7],
                             op.NmConfig(scales=[0.4, 0.4], epsilon=1e-9, max_evals=300))
        prev_max = None
        for entry in res.trace:
            op_name, _, f_max, _ = entry
            if prev_max is not None and op_name != "SHRINK":
                assert f_max <= prev_max + 1e-12
            prev_max = f_max

    def test_non_finite_objective(self):
        with pytest.raises(op.OptimizeError):
            op.nelder_mead(lambda x: float("nan"), [0.5],
                           op.NmConfig(scales=[0.1], max_evals=50))


class TestExtractGateMatrix:
    def test_empty_schedule_identity(self, two_transmon_device, fitted_freqs):
        gm = op.extract_gate_matrix(two_transmon_device, pl.PulseSchedule(), [0, 1],
                                    fitted_freqs)
        assert np.abs(gm.m - np.eye(4)).max() < 1e-12
        assert gm.leakage == pytest.approx(0.0, abs=1e-12)

    def test_zero_pulse_in_own_frame(self):
        # an isolated transmon idles to the identity once its frame is removed
        dev = make_device([(0.301, 13.349)], [])
        from transmonsim.device import device_basis

        f_q = device_basis(dev).transmons[0].energies[1]
        segs = pl.emit_zero(0, 83.0, 0.0)
        gm = op.extract_gate_matrix(dev, pl.PulseSchedule(segs), [0], [f_q])
        assert np.abs(gm.m - np.eye(2)).max() < 1e-9

    def test_column_norms(self, two_transmon_device, fitted_freqs, two_transmon_library):
        gm = op.realize_gate(two_transmon_device, "xpih-0", two_transmon_library,
                             fitted_freqs, subspace_qubits=[0, 1])
        norms = np.sum(np.abs(gm.m) ** 2, axis=0)
        assert np.all(norms <= 1 + 1e-9)
        assert gm.leakage >= 0.0

    def test_duration_off_grid(self, two_transmon_device, fitted_freqs):
        segs = pl.emit_zero(0, 83.0005, 0.0)
        sched = pl.PulseSchedule(segs)
        with pytest.raises(op.OptimizeError):
            op.extract_gate_matrix(two_transmon_device, sched, [0], fitted_freqs, tau=1e-2)


class TestCrTomography:
    def test_zero_amplitude(self, two_transmon_device, fitted_freqs):
        j_ix, j_zx = op.cr_tomography(two_transmon_device, 0, 1, 0.0, t_total=120.0,
                                      f_target=fitted_freqs[1])
        assert abs(j_ix) < TWOPI * 1e-5
        assert abs(j_zx) < TWOPI * 1e-5

    def test_matches_linear_theory(self, two_transmon_device, fitted_freqs):
        j_ix, j_zx = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=500.0,
                                      f_target=fitted_freqs[1])
        j_ix_t, j_zx_t, _ = pl.cr_theory(two_transmon_device, 0, 1, 0.01)
        assert j_ix == pytest.approx(j_ix_t, rel=0.25)
        assert j_zx == pytest.approx(j_zx_t, rel=0.25)

    def test_cancel_tone_shifts_ix_only(self, two_transmon_device, fitted_freqs):
        j_ix0, j_zx0 = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=400.0,
                                        f_target=fitted_freqs[1])
        j_ixp, j_zxp = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=400.0,
                                        f_target=fitted_freqs[1], amp_cancel=0.004)
        j_ixm, j_zxm = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=400.0,
                                        f_target=fitted_freqs[1], amp_cancel=-0.004)
        shift_p = j_ixp - j_ix0
        shift_m = j_ixm - j_ix0
        assert shift_p == pytest.approx(-shift_m, rel=0.05)  # linear displacement
        assert abs(shift_p) > 50 * abs(j_zxp - j_zx0)        # ZX untouched

    def test_order_independence(self, two_transmon_device, fitted_freqs):
        a = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=200.0,
                             f_target=fitted_freqs[1])
        b = op.cr_tomography(two_transmon_device, 0, 1, 0.01, t_total=200.0,
                             f_target=fitted_freqs[1])
        assert a == b


class TestTheoryInitialLibrary:
    def test_gd_seed_values(self, two_transmon_device, fitted_freqs):
        lib = op.theory_initial_library(two_transmon_device, fitted_freqs)
        p = lib.gd_half[0]
        assert p.f == fitted_freqs[0]
        assert p.amp == pytest.approx(0.002221, rel=0.05)
        assert p.beta == pytest.approx(0.2274, rel=0.02)
        assert lib.gd_pi[0].amp == pytest.approx(2 * p.amp, rel=1e-12)

    def test_cr2_seed(self, two_transmon_device, fitted_freqs):
        lib = op.theory_initial_library(two_transmon_device, fitted_freqs, pairs=[(0, 1)])
        params = lib.cnot[(0, 1)]
        assert params.scheme == "CR2"
        assert params.t_cr == pytest.approx(103.0, rel=0.15)
        assert params.xi == 0.0

"""Reference device parameter sets and calibrated pulse tables.

These fixed parameter sets are used throughout the tests and demos: a single
transmon-resonator pair, a two-transmon device coupled by one resonator, two
five-transmon layouts, and randomized benchmark devices.  The two-transmon
pulse table holds a calibrated working point (GD pi/2 and pi pulses at 83 ns
plus CR1/CR2/CR4 CNOT parameter sets) that realizes its gates with average
fidelities around 0.99.
"""

from __future__ import annotations

import numpy as np

from .device import DeviceModel, make_device
from .pulses import CrParams, GdParams, PulseLibrary


def single_transmon_resonator() -> DeviceModel:
    """One transmon (4.498 GHz qubit) read out by a 5.821 GHz resonator."""
    return make_device([(0.222, 12.61)], [(5.821, 0)], g={(0, 0): 0.0349})


def two_transmon() -> DeviceModel:
    """Two transmons (5.350 / 5.120 GHz) coupled by a 7 GHz bus resonator."""
    return make_device(
        [(0.301, 13.349), (0.301, 12.292)],
        [(7.0, 0)],
        g={(0, 0): 0.07, (0, 1): 0.07},
    )


def five_transmon_small() -> DeviceModel:
    """Five transmons on two bus resonators (three transmons per bus)."""
    ej = [13.3511, 13.1446, 12.2942, 12.7882, 12.0903]
    g = {(0, 0): 0.07, (0, 1): 0.07, (0, 2): 0.07,
         (1, 2): 0.07, (1, 3): 0.07, (1, 4): 0.07}
    return make_device([(0.301, e) for e in ej], [(7.01, 0), (6.63, 0)], g=g)


def five_transmon_large() -> DeviceModel:
    """Five transmons on six pairwise bus resonators (ring-like layout)."""
    ej = [11.6671, 12.1273, 13.003, 12.2456, 11.1943]
    omegas = [6.45, 6.25, 6.65, 6.65, 6.45, 6.85]
    links = [(0, (1, 2)), (1, (0, 1)), (2, (2, 3)), (3, (1, 4)), (4, (3, 4)), (5, (0, 4))]
    g = {}
    for r, (i, j) in links:
        g[(r, i)] = 0.07
        g[(r, j)] = 0.07
    return make_device([(0.301, e) for e in ej], [(w, 0) for w in omegas], g=g)


def benchmark_device(ntr: int, nres: int = 1, seed: int = 0, config: int = 1,
                     max_dim: int = 4 ** 13) -> DeviceModel:
    """Randomized all-to-all device for kernel benchmarks (seeded)."""
    rng = np.random.default_rng(seed)
    span_w, span_g = (3.0, 0.03) if config == 1 else (2.0, 0.02)
    transmons = [(0.301, 10.0 + float(rng.uniform(0.0, 5.0))) for _ in range(ntr)]
    resonators = [(5.5 + float(rng.uniform(0.0, span_w)), 0) for _ in range(nres)]
    g = {(r, i): 0.055 + float(rng.uniform(0.0, span_g))
         for r in range(nres) for i in range(ntr)}
    return make_device(transmons, resonators, g=g, max_dim=max_dim)


#: fitted precession frequencies of the two-transmon device (GHz), spectators in |0>
TWO_TRANSMON_FITTED_FREQS = (5.3463, 5.1167)


def two_transmon_pulse_library() -> PulseLibrary:
    """Calibrated pulse table for the two-transmon device."""
    lib = PulseLibrary()
    lib.gd_half[0] = GdParams(f=5.3463, t_x=83.0, amp=0.002221, beta=0.2309)
    lib.gd_half[1] = GdParams(f=5.1167, t_x=83.0, amp=0.002269, beta=0.2891)
    lib.gd_pi[0] = GdParams(f=5.3463, t_x=83.0, amp=0.004444, beta=0.2193)
    lib.gd_pi[1] = GdParams(f=5.1167, t_x=83.0, amp=0.004538, beta=0.2239)
    lib.cnot[(0, 1)] = CrParams(scheme="CR2", f_c=5.3463, f_t=5.1167,
                                t_cr=102.9746, amp_cr=0.01111)
    lib.cnot[(1, 0)] = CrParams(scheme="CR2", f_c=5.1167, f_t=5.3463,
                                t_cr=71.5580, amp_cr=0.07058, xi=np.pi)
    return lib



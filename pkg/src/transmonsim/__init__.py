"""Pulse-level simulator for transmon quantum computers.

Solves the time-dependent Schroedinger equation for coupled
transmon-resonator networks under microwave pulse schedules, compiles gate
circuits to pulses, optimizes pulse parameters, and evaluates quantum
operations with a full gate-metrics stack.  Companion modules cover ideal
error channels, a [[4,2,2]] error-detection protocol, Lindblad dynamics and
electromagnetic-environment parameter extraction.
"""

__version__ = "0.1.0"

import os as _os

# allow oversubscribed kernel thread counts on small hosts; must be set
# before numba is first imported
_os.environ.setdefault("NUMBA_NUM_THREADS", str(max(_os.cpu_count() or 1, 16)))

from . import (channels, circuits, device, environment, evaluator, faulttolerance,
               metrics, optimize, presets, pulses, solver)

__all__ = [
    "channels", "circuits", "device", "environment", "evaluator",
    "faulttolerance", "metrics", "optimize", "presets", "pulses", "solver",
    "__version__",
]

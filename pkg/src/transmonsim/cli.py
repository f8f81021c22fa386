"""Command-line front end wiring the simulation, compilation and analysis tools.

Every run that produces an output directory also writes a ``manifest.json``
recording the command, input paths, seed, package version and wall time, so
results are reproducible from the manifest alone.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .device import DeviceModel, TWOPI, load_device
from .evaluator import BlochTrajectory, bloch_trajectory, write_bloch_csv


class CliError(ValueError):
    pass


def _threads_default() -> int:
    env = os.environ.get("TRANSMON_SIM_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise CliError(f"TRANSMON_SIM_THREADS must be an integer, got {env!r}")
    return 1


def _write_manifest(out_dir, args, t_start, extra=None):
    manifest = {
        "command": " ".join(sys.argv),
        "inputs": {k: v for k, v in vars(args).items()
                   if isinstance(v, str) and os.path.exists(v)},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_time_s": round(time.time() - t_start, 3),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _load_matrix(path) -> np.ndarray:
    """Matrix file: one row per line, entries 're,im' separated by whitespace."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            row = []
            for tok in line.split():
                re_s, im_s = tok.split(",")
                row.append(complex(float(re_s), float(im_s)))
            rows.append(row)
    if not rows or any(len(r) != len(rows) for r in rows):
        raise CliError(f"{path}: expected a square matrix of 're,im' entries")
    return np.array(rows)


def _parse_init(spec: str, device: DeviceModel):
    """Initial-state spec: comma list of q<i>=<0|1|2|3|+|-> / r<r>=<k>, or a state file."""
    from .solver import StateVector, load_state_binary, load_state_text

    if os.path.exists(spec):
        with open(spec, "rb") as fh:
            magic = fh.read(8)
        state = (load_state_binary(spec) if magic == b"TRSMSTAT" else load_state_text(spec))
        if (state.ntr, state.nres) != (device.ntr, device.nres):
            raise CliError(f"state file dimensions do not match the device")
        return state
    tokens = {"0": [1, 0, 0, 0], "1": [0, 1, 0, 0], "2": [0, 0, 1, 0], "3": [0, 0, 0, 1],
              "+": [2 ** -0.5, 2 ** -0.5, 0, 0], "-": [2 ** -0.5, -(2 ** -0.5), 0, 0]}
    res = [np.array([1.0, 0, 0, 0], dtype=complex) for _ in range(device.nres)]
    trs = [np.array([1.0, 0, 0, 0], dtype=complex) for _ in range(device.ntr)]
    if spec.strip():
        for part in spec.split(","):
            site, _, val = part.strip().partition("=")
            if not val:
                raise CliError(f"bad init token {part!r} (need site=value)")
            if site[0] == "q":
                if val not in tokens:
                    raise CliError(f"unknown transmon level {val!r}")
                trs[int(site[1:])] = np.array(tokens[val], dtype=complex)
            elif site[0] == "r":
                amp = np.zeros(4, dtype=complex)
                amp[int(val)] = 1.0
                res[int(site[1:])] = amp
            else:
                raise CliError(f"bad init site {site!r}")
    return StateVector.product(res, trs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args):
    from .pulses import load_schedule
    from .solver import LoopStrategy, SolverConfig, evolve, save_state_text

    device = load_device(args.device)
    schedule = load_schedule(args.pulses) if args.pulses else None
    state = _parse_init(args.init, device)
    snaps = sorted(float(s) for s in args.snap.split(",")) if args.snap else [args.tmax]
    cfg = SolverConfig(tau=args.tau, strategy=LoopStrategy(args.strategy),
                       snapshot_times=tuple(snaps), thread_count=args.threads)
    t0 = time.time()
    traj = evolve(state, device, schedule, cfg)
    os.makedirs(args.out, exist_ok=True)
    for n in range(len(traj)):
        save_state_text(traj.state(n), os.path.join(args.out, f"state_{traj.times[n]:.3f}.txt"))
    write_bloch_csv(os.path.join(args.out, "bloch.csv"), bloch_trajectory(traj))
    _write_manifest(args.out, args, t0)
    print(f"wrote {len(traj)} snapshots and bloch.csv to {args.out}")
    return 0


def _cmd_compile(args):
    from .circuits import compile_circuit, load_circuit
    from .pulses import load_pulse_library, save_schedule

    load_device(args.device)  # validated, catches mismatched inputs early
    library = load_pulse_library(args.pulses)
    circuit = load_circuit(args.circuit)
    schedule = compile_circuit(circuit, library, parallel=args.parallel)
    save_schedule(schedule, args.out)
    print(f"compiled {len(circuit.gates)} gates to {len(schedule.segments)} segments, "
          f"duration {schedule.duration:.3f} ns")
    return 0


def _cmd_optimize(args):
    from .optimize import fit_frequency_of, optimize_gate, theory_initial_library, write_trace_csv
    from .pulses import format_pulse_library, load_pulse_library

    device = load_device(args.device)
    t0 = time.time()
    if args.pulses:
        library = load_pulse_library(args.pulses)
        freqs = [library.gd_half[q].f if q in library.gd_half else
                 fit_frequency_of(device, q) for q in range(device.ntr)]
    else:
        freqs = [fit_frequency_of(device, q) for q in range(device.ntr)]
        pairs = []
        if args.gate.startswith("cnot-"):
            _, c, t = args.gate.split("-")
            pairs = [(int(c), int(t))]
        library = theory_initial_library(device, freqs, pairs=pairs)
    result = optimize_gate(device, args.gate, library, freqs, withf=args.withf,
                           max_evals=args.max_evals, threads=args.threads)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(format_pulse_library(result.library))
    names = [f"p{k}" for k in range(result.nm.x_best.size)]
    write_trace_csv(os.path.join(os.path.dirname(os.path.abspath(args.out)), "trace.csv"),
                    result.nm, names)
    print(f"{args.gate}: delta = {result.delta:.3e} after {result.nm.n_evals} evaluations "
          f"({time.time() - t0:.1f} s)")
    return 0


def _cmd_metrics(args):
    from . import metrics as mt
    from .optimize import distance

    m = _load_matrix(args.m)
    u = _load_matrix(args.u)
    report = {}
    want_all = args.all or not (args.fid or args.diamond or args.unitarity or args.decomp)
    if want_all or args.fid:
        report["F_avg"] = mt.avg_fidelity(m, u)
        report["delta"] = distance(m, u)[0]
    if want_all or args.diamond:
        report["diamond_max"] = mt.diamond_max(m, u)
        report["diamond_min"] = mt.diamond_min(m, u)
        lb, pauli, ub = mt.diamond_bounds(m, u)
        report.update(diamond_lb=lb, diamond_pauli_lb=pauli, diamond_ub=ub)
    if want_all or args.unitarity:
        report["unitarity"] = mt.unitarity(m, seed=args.seed)
    if want_all or args.decomp:
        aa = mt.axis_angle(mt.ptm_of(m), mt.ptm_of(u))
        report["phi"] = aa.phi
        report["gamma"] = aa.gamma
        for k, val in enumerate(aa.axis):
            if abs(val) > 1e-3:
                report[f"axis_{k}"] = val
    for key, val in report.items():
        print(f"{key}={val:.6g}")
    return 0


def _cmd_singlet(args):
    from .channels import QubitChannels, parse_channel_file, singlet_experiment

    channels = QubitChannels.none()
    if args.channels:
        with open(args.channels, "r", encoding="utf-8") as fh:
            channels = parse_channel_file(fh.read())
    if os.path.exists(args.angles):
        pairs = []
        with open(args.angles, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    a, b = line.replace(",", " ").split()
                    pairs.append((float(a), float(b)))
    else:
        n = int(args.angles)
        grid = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        pairs = [(a, b) for a in grid for b in grid]
    print("theta0,theta1,E01,E0,E1")
    for a, b in pairs:
        e01, e0, e1, _ = singlet_experiment(a, b, channels)
        print(f"{a:.6f},{b:.6f},{e01:.9f},{e0:.9f},{e1:.9f}")
    return 0


def _cmd_ft_run(args):
    from .channels import parse_channel_file
    from .faulttolerance import INITIALS, NoiseModel, parse_circuit_family, run_protocol

    with open(args.circuits, "r", encoding="utf-8") as fh:
        circuits = parse_circuit_family(fh.read())
    noise = NoiseModel()
    if args.noise:
        with open(args.noise, "r", encoding="utf-8") as fh:
            ch = parse_channel_file(fh.read())
        dep = next(iter(ch.dep.values()), (0.0, 0.0, 0.0))
        noise = NoiseModel(depolarizing=sum(dep), meas_error=ch.meas_eps)
    initials = INITIALS if args.init == "all" else (args.init,)
    shots = "exact" if args.shots == "exact" else int(args.shots)
    records = run_protocol(circuits, noise, shots=shots, seed=args.seed, initials=initials)
    t0 = time.time()
    lines = ["id,init,d_bare,d_enc,r"]
    for rec in records:
        lines.append(f"{rec.id},{rec.initial},{rec.d_bare:.8f},{rec.d_enc:.8f},{rec.kept_ratio:.8f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(records)} records to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_foster(args):
    from .environment import foster_extract

    data = np.loadtxt(args.admittance, delimiter=",", comments="#")
    omega, re_y, im_y = data[:, 0], data[:, 1], data[:, 2]

    def admittance(w):
        return complex(np.interp(w, omega, re_y), np.interp(w, omega, im_y))

    modes, caps, inds = foster_extract(admittance, omega)
    lines = ["omega_rad_ns,xi,C,L"]
    for j in range(modes.n_modes):
        lines.append(",".join(repr(float(v)) for v in
                              (modes.omegas[j], modes.xis[j], caps[j], inds[j])))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"extracted {modes.n_modes} modes to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_bath(args):
    from .device import format_device
    from .environment import random_bath

    device = load_device(args.device)
    bath = random_bath(device, args.L, getattr(args, "lambda"), args.seed)
    out_dev = bath.to_device()
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(format_device(out_dev))
    print(f"wrote device with {out_dev.nres} resonators to {args.out}")
    return 0


def _cmd_lindblad(args):
    from .device import dense_hamiltonian, device_basis
    from .environment import excitation_probability, lindblad_evolve, lowering_operator
    from .solver import site_shift

    device = load_device(args.device)
    if device.ntr != 1 or device.nres != 1:
        raise CliError("lindblad runs on a single transmon-resonator device")
    k = int(args.init.split("=")[1]) if "=" in args.init else int(args.init)
    offset = device.resonators[0].fock_offset
    if not offset <= k < offset + 4:
        raise CliError(f"initial photon number {k} outside the Fock window")
    h = dense_hamiltonian(device)
    a_op = np.kron(lowering_operator(4, offset), np.eye(4))
    rho0 = np.zeros((16, 16), dtype=complex)
    idx = (k - offset) * 4
    rho0[idx, idx] = 1.0
    every = max(int(round(args.snap / args.dt)), 1)
    times, rhos = lindblad_evolve(h, rho0, TWOPI * args.kappa, a_op, args.tmax, args.dt,
                                  snapshot_every=every)
    lines = ["t,p_excited"]
    for t, rho in zip(times, rhos):
        lines.append(f"{t:.6f},{excitation_probability(rho):.9f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(times)} samples to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_fitfreq(args):
    from .optimize import fit_frequency_of

    device = load_device(args.device)
    f, fit = fit_frequency_of(device, args.qubit, duration=args.tmax, n_data=args.ndata,
                              tau=args.tau, detail=True)
    print(f"{f:.9f} {fit.chi2_min:.6e}")
    return 0


def _cmd_bench(args):
    from .presets import benchmark_device
    from .solver import StateVector, _run_steps

    device = (load_device(args.device) if args.device
              else benchmark_device(args.sites - 1, 1, seed=args.seed))
    thread_list = [int(t) for t in args.threads.split(",")]
    rows = ["strategy,threads,seconds"]
    rng = np.random.default_rng(args.seed)
    for strategy in (0, 1, 2):
        for threads in thread_list:
            psi = StateVector(device.ntr, device.nres,
                              _random_state(device.dim, rng))
            t0 = time.time()
            _run_steps(psi, device, None, 0.0, 1e-3, args.steps, strategy, threads,
                       np.zeros(0, dtype=np.int64))
            rows.append(f"{strategy},{threads},{time.time() - t0:.6f}")
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(rows) - 1} rows to {args.out}")
    else:
        print(text, end="")
    return 0


def _random_state(dim, rng):
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transmonsim",
                                     description="Pulse-level transmon quantum computer simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve a state under a pulse schedule")
    p.add_argument("--device", required=True)
    p.add_argument("--pulses", help="schedule file (omit for free evolution)")
    p.add_argument("--init", default="", help="site=value list or a state file")
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--snap", help="comma-separated snapshot times (ns)")
    p.add_argument("--strategy", type=int, choices=(0, 1, 2), default=2)
    p.add_argument("--threads", type=int, default=_threads_default())
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compile", help="compile a gate circuit to a pulse schedule")
    p.add_argument("--device", required=True)
    p.add_argument("--pulses", required=True, help="pulse library file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("optimize", help="tune pulse parameters for one gate")
    p.add_argument("--device", required=True)
    p.add_argument("--gate", required=True, help="xpih-<i> | xpi-<i> | cnot-<c>-<t>")
    p.add_argument("--scheme", choices=("CR1", "CR2", "CR4"), default="CR2")
    p.add_argument("--pulses", help="starting pulse library (default: theory values)")
    p.add_argument("--withf", action="store_true")
    p.add_argument("--max-evals", type=int, default=400)
    p.add_argument("--threads", type=int, default=_threads_default())
    p.add_argument("--out", required=True, help="output pulse library file")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("metrics", help="gate metrics between two matrices")
    p.add_argument("--m", required=True)
    p.add_argument("--u", required=True)
    p.add_argument("--all", action="store_true")
    p.add_argument("--fid", action="store_true")
    p.add_argument("--diamond", action="store_true")
    p.add_argument("--unitarity", action="store_true")
    p.add_argument("--decomp", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("singlet", help="singlet characterization with error channels")
    p.add_argument("--angles", required=True, help="file of theta pairs or a grid size")
    p.add_argument("--channels", help="channel file (dep/amp/meas lines)")
    p.set_defaults(func=_cmd_singlet)

    p = sub.add_parser("ft-run", help="error-detection protocol over a circuit family")
    p.add_argument("--circuits", required=True)
    p.add_argument("--noise", help="channel file")
    p.add_argument("--init", choices=("00", "0+", "phi+", "all"), default="all")
    p.add_argument("--shots", default="exact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ft_run)

    p = sub.add_parser("foster", help="extract environment modes from an admittance")
    p.add_argument("--admittance", required=True, help="CSV of omega, Re Y, Im Y")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_foster)

    p = sub.add_parser("bath", help="attach a random bath to a device")
    p.add_argument("--device", required=True)
    p.add_argument("--L", type=int, default=10)
    p.add_argument("--lambda", type=float, required=True, help="max coupling (GHz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bath)

    p = sub.add_parser("lindblad", help="master-equation run with photon loss")
    p.add_argument("--device", required=True)
    p.add_argument("--kappa", type=float, required=True, help="photon loss rate (GHz)")
    p.add_argument("--init", default="k=0", help="initial photon number, k=<int>")
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--snap", type=float, default=0.1, help="output spacing (ns)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lindblad)

    p = sub.add_parser("fitfreq", help="fit a qubit precession frequency")
    p.add_argument("--device", required=True)
    p.add_argument("--qubit", type=int, default=0)
    p.add_argument("--tmax", type=float, default=1000.0)
    p.add_argument("--ndata", type=int, default=10000)
    p.add_argument("--tau", type=float, default=1e-3)
    p.set_defaults(func=_cmd_fitfreq)

    p = sub.add_parser("bench", help="time the update kernels per strategy and thread count")
    p.add_argument("--device")
    p.add_argument("--sites", type=int, default=10, help="transmons+resonators if no device given")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--threads", default="1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

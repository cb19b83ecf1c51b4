"""Command-line front end.

Subcommands ``calibrate``, ``run``, ``rates``, ``exchange`` and ``readout``
read one YAML config (``--config``), apply ``DQDSIM_*`` environment
overrides, and write their results into ``--out`` (default: current
directory). A one-line JSON summary goes to stdout. Outputs carry no
timestamps, so fixed seeds give byte-identical files.

Exit codes: 0 ok, 2 config error, 3 dimension guard, 4 convergence failure,
5 calibration failure, 6 every readout shot inconclusive.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import decoherence as deco
from . import microscopic as micro
from . import readout as ro
from .control import CalibrationError
from .core import GuardError, RegisterState, basis_labels, leakage_mask, propagate_sampled
from .gates import GateSpec, ideal_state, synthesize, synthesize_program, verify_gate
from .pulses import PulseSchedule, ScheduleError

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_CONVERGENCE, EXIT_CALIBRATION, EXIT_READOUT = 0, 2, 3, 4, 5, 6
CALIBRATION_TOL = 1e-8
CALIBRATION_GATES = (
    GateSpec("AmpFlip", (0,)),
    GateSpec("PhaseFlip", (0,)),
    GateSpec("PhaseShift", (0,), math.pi / 2),
    GateSpec("Swap", (0, 1)),
    GateSpec("SqrtSwap", (0, 1)),
    GateSpec("Xor", (0, 1)),
)


def fmt(x):
    return format(float(x), ".17g")


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_calibrate(cfg, out_dir):
    params, amps = cfg.device_params(), cfg.gate_amplitudes()
    gates, failed = [], None
    for spec in CALIBRATION_GATES:
        sched = synthesize(spec, params, amps)
        fid = verify_gate(spec, params, amps)
        gates.append({
            "gate": str(spec),
            "duration_ps": sched.total_duration,
            "fidelity": fid,
            "pulses": [p.to_dict() for p in sched.pulses],
        })
        if failed is None and not fid > 1.0 - CALIBRATION_TOL:
            failed = (str(spec), fid)
    report = {
        "A_max_meV": amps.A_max,
        "P_max_meV": amps.P_max,
        "J_max_meV": amps.J_max,
        "amp_flip_duration_ps": gates[0]["duration_ps"],
        "gates": gates,
    }
    _write(out_dir, "calibration.json", _json(report))
    if failed:
        raise CalibrationError(failed[0], failed[1], CALIBRATION_TOL)
    return {"amp_flip_duration_ps": report["amp_flip_duration_ps"], "min_fidelity": min(g["fidelity"] for g in gates)}


def _run_schedule(cfg, params):
    prog = cfg.gate_program()
    sched = synthesize_program(prog, params, cfg.gate_amplitudes())
    if cfg.program.idle_ps:
        sched = sched.then(PulseSchedule((), cfg.program.idle_ps))
    return prog, sched


def _sample_times(total, step):
    n = int(math.floor(total / step + 1e-9))
    times = [k * step for k in range(n + 1)]
    if total - times[-1] > 1e-9:
        times.append(total)
    return times


def cmd_run(cfg, out_dir):
    params = cfg.device_params()
    p = cfg.program
    n = p.n_qubits
    prog, sched = _run_schedule(cfg, params)
    state = RegisterState.basis(p.initial)
    target = ideal_state(state, prog).amplitudes
    times = _sample_times(sched.total_duration, p.sample_ps)
    labels = basis_labels(n)
    leak_mask = leakage_mask(n)

    if p.method == "unitary":
        states = propagate_sampled(state, sched, params, times, dt_max=p.dt_ps)
        pops = np.array([s.probabilities() for s in states])
        fid = np.array([abs(np.vdot(target, s.amplitudes)) ** 2 for s in states])
        extra = {}
    else:
        c = cfg.channels
        chans = deco.flip_channels(n, cfg.channel_set(), c.eps_meV, params.temperature_kT)
        chans = [deco.FlipChannel(f.qubit, f.dqd, f.down * c.rate_scale, f.up * c.rate_scale) for f in chans]
        if p.method == "lindblad":
            if c.noise_to_signal:
                raise cfgmod.ConfigError("channels.noise_to_signal: amplitude jitter needs method trajectories")
            res = deco.lindblad_evolve(state, sched, params, chans, dt=p.dt_ps, sample_times=times)
            pops = res.populations()
            fid = np.array([np.real(np.vdot(target, r @ target)) for r in res.rhos])
            extra = {"lindblad_dt_ps": res.dt}
        else:
            res = deco.run_trajectories(
                state, sched, params, chans, n_traj=p.n_traj, seed=cfg.seed, dt=p.dt_ps,
                sample_times=times, noise_to_signal=c.noise_to_signal,
            )
            pops = res.populations
            fid = pops @ (np.abs(target) ** 2) if np.count_nonzero(target) == 1 else np.full(len(times), math.nan)
            extra = {"n_traj": p.n_traj, "mean_jumps": float(np.mean(res.n_jumps))}

    leak = pops[:, leak_mask].sum(axis=1)
    header = ["time_ps"] + [f"pop_{l}" for l in labels] + ["leakage_total", "fidelity"]
    rows = [[t, *pops[k], leak[k], fid[k]] for k, t in enumerate(times)]
    _write(out_dir, "run.csv", _csv(header, rows))
    summary = {
        "method": p.method,
        "program": [str(g) for g in prog],
        "duration_ps": sched.total_duration,
        "final_populations": {l: float(v) for l, v in zip(labels, pops[-1])},
        "final_leakage": float(leak[-1]),
        "final_fidelity": float(fid[-1]),
        **extra,
    }
    _write(out_dir, "run_summary.json", _json(summary))
    return {"final_fidelity": summary["final_fidelity"], "final_leakage": summary["final_leakage"]}


def rates_table(cfg):
    chs = cfg.channel_set()
    kT = cfg.device.temperature_kT
    defo, piezo = chs.get("deformation"), chs.get("piezoelectric")
    two = chs.get("two_phonon")
    rows = []
    for eps in cfg.rates.eps_grid_meV:
        row = [eps]
        for ch in (defo, piezo):
            if ch is None:
                row += [math.nan] * 3
            else:
                row += [deco.spontaneous_tau(eps, ch), deco.stimulated_tau(eps, kT, ch, "emission"),
                        deco.stimulated_tau(eps, kT, ch, "absorption")]
        row += [two.two_phonon_rate if two else 0.0, deco.total_flip_rate(eps, kT, chs)]
        rows.append(row)
    header = [
        "eps_meV",
        "tau_deformation_s", "tau_deformation_emission_s", "tau_deformation_absorption_s",
        "tau_piezo_s", "tau_piezo_emission_s", "tau_piezo_absorption_s",
        "two_phonon_rate_per_s", "total_flip_rate_per_s",
    ]
    return header, rows


def cmd_rates(cfg, out_dir):
    header, rows = rates_table(cfg)
    _write(out_dir, "rates.csv", _csv(header, rows))
    return {"rows": len(rows)}


def cmd_exchange(cfg, out_dir):
    params, geom = cfg.device_params(), cfg.geometry_obj()
    ex = cfg.exchange
    rep = micro.selection_rule_report(
        geom, params, n_sigma=ex.n_sigma, n_samples=ex.n_samples, replicates=ex.replicates,
        seed=cfg.seed, rel_tol=ex.rel_tol,
    )
    v, e = rep.result.element(0, 1)
    summary = {
        "symmetric": rep.symmetric,
        "leakage_max_sigma": rep.leakage_sigma,
        "leakage_zero": rep.leakage_zero,
        "exchange_sigma": rep.exchange_sigma,
        "A_meV": abs(v) if rep.symmetric else None,
        "A_stderr_meV": e,
        "direct_meV": rep.result.direct[0],
        "exchange_part_meV": rep.result.exchange[0],
        "point_dipole_limit_meV": micro.point_dipole_limit(geom, params),
        "n_samples": rep.result.n_samples,
        "passed": rep.passed,
    }
    _write(out_dir, "exchange.csv", rep.to_csv())
    _write(out_dir, "exchange_summary.json", _json(summary))
    return {"passed": rep.passed, "A_meV": summary["A_meV"], "leakage_max_sigma": rep.leakage_sigma}


def readout_shots(cfg, params):
    r = cfg.readout
    rcfg = cfg.readout_config()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    p_plus = ro.thermal_initialize(r.delta_eps, params.temperature_kT)[0] if r.initial == "thermal" else None
    expected = {"plus": "L", "minus": "R"}
    shots = []
    for _ in range(r.n_shots):
        label = r.initial if p_plus is None else ("plus" if rng.random() < p_plus else "minus")
        try:
            m = ro.simulate_measurement(label, rcfg, params, rng)
            shots.append({"initial_label": label, "outcome": m.dot, "switch_off_ps": m.switch_off_used,
                          "correct": m.dot == expected[label]})
        except ro.InconclusiveReadout:
            shots.append({"initial_label": label, "outcome": None, "switch_off_ps": None, "correct": False})
    return shots


def cmd_readout(cfg, out_dir):
    params = cfg.device_params()
    shots = readout_shots(cfg, params)
    lines = "".join(json.dumps(s, sort_keys=True) + "\n" for s in shots)
    _write(out_dir, "shots.jsonl", lines)
    n = len(shots)
    inconclusive = sum(s["outcome"] is None for s in shots)
    summary = {
        "n_shots": n,
        "initial": cfg.readout.initial,
        "assignment_fidelity": sum(s["correct"] for s in shots) / n,
        "fraction_L": sum(s["outcome"] == "L" for s in shots) / n,
        "fraction_R": sum(s["outcome"] == "R" for s in shots) / n,
        "inconclusive": inconclusive,
    }
    _write(out_dir, "readout_summary.json", _json(summary))
    if inconclusive == n:
        raise ro.InconclusiveReadout(0.5, cfg.readout.threshold)
    return summary


COMMANDS = {
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "rates": cmd_rates,
    "exchange": cmd_exchange,
    "readout": cmd_readout,
}


# ---------------------------------------------------------------------------
# entry point


def _global_flags(parser, suppress):
    d = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", metavar="PATH", help="YAML config file", **d)
    parser.add_argument("--seed", type=int, metavar="N", help="override the config seed", **d)
    parser.add_argument("--out", metavar="DIR", help="output directory (default: .)", **d)
    parser.add_argument("--dump-config", action="store_true", help="print the effective config as YAML and exit", **d)


def build_parser():
    parser = argparse.ArgumentParser(prog="dqdsim", description="Charge-qubit DQD register simulator")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "calibrate": "calibrate gate pulses and report fidelities",
        "run": "simulate the configured gate program",
        "rates": "tabulate phonon lifetimes and flip rates",
        "exchange": "Coulomb selection-rule report and exchange coupling",
        "readout": "simulate readout shots",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config, seed=args.seed)
        if args.dump_config:
            sys.stdout.write(cfg.dump())
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("dqdsim: error: a subcommand is required", file=sys.stderr)
            return EXIT_CONFIG
        summary = COMMANDS[args.command](cfg, args.out or ".")
    except (cfgmod.ConfigError, ScheduleError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (micro.QuadratureError, deco.ConvergenceError) as exc:
        print(f"convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except CalibrationError as exc:
        print(f"calibration: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except ro.InconclusiveReadout as exc:
        print(f"readout: {exc}", file=sys.stderr)
        return EXIT_READOUT
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end.

Subcommands map onto the library layers: `steady` solves the response cubic
at chosen detunings, `bistable-map` charts the window boundaries against
drive strength, `sweep` runs the stepped-frequency hysteresis measurement,
`integrate` produces a time-domain trajectory from either model, and
`vibres` runs the three-stage weak-force amplification protocol.  Every run
writes CSV artifacts plus a manifest recording the exact configuration,
seed, tool version and outputs; rerun() replays a manifest.

Exit codes: 0 success, 1 runtime failure (divergence etc.), 2 bad
configuration or arguments.
"""

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .dynamics import (DivergenceError, EnvelopeState, FullState,
                       integrate_envelope, integrate_full)
from .experiments import (SweepExperimentConfig, run_sweep,
                          run_vibres_protocol, tune_enhancement, write_bundle)
from .measurement import CameraConfig
from .serialize import write_csv
from .steady import bistable_region, critical_drive, steady_state_roots
from .trap import (ZEPTONEWTON, ParameterError, config_from_dict,
                   default_config, derive_params, load_config, reduced_drive)

TWO_PI = 2.0 * math.pi
MANIFEST_NAME = "manifest.json"


def _resolve_config(args):
    raw = dict(load_config(args.config).raw) if args.config else \
        default_config()
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# subcommands; each returns the list of files written (relative to out)

def cmd_steady(rc, args, out):
    p, d = rc.trap, rc.drive
    derived = derive_params(p, d)
    detunings_hz = args.detuning_hz if args.detuning_hz else \
        [d.detuning(p) / TWO_PI]
    rows = []
    for dhz in detunings_hz:
        sols = steady_state_roots(TWO_PI * dhz, derived.f0_reduced,
                                  p.damping, derived.xi)
        for k, s in enumerate(sols):
            rows.append((float(dhz), k, s.u, s.amplitude * 1e6, s.stability))
    meta = {"f0_reduced_mps": derived.f0_reduced, "gamma_rad_s": p.damping,
            "xi_rad_s_m2": derived.xi}
    write_csv(os.path.join(out, "steady_roots.csv"),
              ("detuning_hz", "root_index", "u_m2", "amplitude_um",
               "stability"), rows, metadata=meta)
    return ["steady_roots.csv"]


def cmd_bistable_map(rc, args, out):
    p = rc.trap
    derived = derive_params(p, rc.drive)
    f0_zn = args.f0_zn if args.f0_zn else \
        [float(v) for v in np.linspace(0.5, 30.0, 60)]
    rows = []
    for zn in f0_zn:
        f0 = reduced_drive(p, zn * ZEPTONEWTON)
        w = bistable_region(f0, p.damping, derived.xi)
        rows.append((float(zn), f0, w.exists, w.delta_lower / TWO_PI,
                     w.delta_upper / TWO_PI, w.center / TWO_PI,
                     (w.delta_upper - w.delta_lower) / TWO_PI))
    fc = critical_drive(p.damping, derived.xi)
    meta = {"critical_f0_mps": fc,
            "critical_force_zn": fc * 4.0 * p.mass * p.omega_x / ZEPTONEWTON,
            "gamma_rad_s": p.damping, "xi_rad_s_m2": derived.xi}
    write_csv(os.path.join(out, "bistable_map.csv"),
              ("f0_zn", "f0_reduced_mps", "exists", "delta_lower_hz",
               "delta_upper_hz", "center_hz", "width_hz"), rows,
              metadata=meta)
    return ["bistable_map.csv"]


def cmd_sweep(rc, args, out):
    p = rc.trap
    drives_zn = args.drive_zn if args.drive_zn else \
        [float(v) for v in np.geomspace(0.5, 30.0, 5)]
    cfg = SweepExperimentConfig(
        trap=p,
        delta_min=TWO_PI * args.delta_min_hz,
        delta_max=TWO_PI * args.delta_max_hz,
        step=TWO_PI * args.step_hz,
        dwell=args.dwell_s,
        drives=tuple(reduced_drive(p, zn * ZEPTONEWTON) for zn in drives_zn),
        direction=args.direction,
        model=args.model)
    result = run_sweep(cfg)

    outputs = []
    jumps = {}
    i = 0
    for zn, f0 in zip(drives_zn, cfg.drives):
        for direction in cfg.directions:
            entry = result.entries[i]
            i += 1
            name = f"sweep_f0_{zn:g}zn_{direction}.csv"
            entry.record.write_csv(os.path.join(out, name),
                                   metadata={"model": cfg.model,
                                             "f0_zn": float(zn)})
            outputs.append(name)
            jumps[f"{zn:g}zn_{direction}"] = \
                [v / TWO_PI for v in entry.jump_detunings]
    summary = {"jump_detunings_hz": jumps, "model": cfg.model,
               "f0_ref_mps": result.f0_ref, "base_step_m2": result.base_step}
    with open(os.path.join(out, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs.append("sweep_summary.json")
    return outputs


def cmd_integrate(rc, args, out):
    p, d = rc.trap, rc.drive
    if args.model == "full":
        t_end = args.t_end if args.t_end is not None else 0.005
        dt = args.dt if args.dt is not None else TWO_PI / (200.0 * p.omega_x)
        stride = args.stride if args.stride is not None else 10
        traj = integrate_full(FullState.at_rest(), p, d, t_end, dt,
                              stride=stride)
    else:
        t_end = args.t_end if args.t_end is not None else 1.0
        dt = args.dt   # None picks the integrator default
        stride = args.stride if args.stride is not None else 50
        traj = integrate_envelope(EnvelopeState.at_rest(), p, d, t_end,
                                  dt=dt, stride=stride)
    traj.write_csv(os.path.join(out, "trajectory.csv"),
                   metadata={"seed": rc.seed})
    return ["trajectory.csv"]


def cmd_vibres(rc, args, out):
    p, d = rc.trap, rc.drive
    camera = CameraConfig(seed=rc.seed, **rc.camera)
    duration = args.duration_s if args.duration_s is not None else rc.duration
    raw = dict(rc.raw)
    raw["duration_s"] = float(duration)
    extra = {"seed": rc.seed, "duration_s": float(duration)}

    if args.tune:
        tuned = tune_enhancement(p, d)
        d = replace(d, fe_force=tuned.best_fe)
        raw["fe_zn"] = tuned.best_fe / ZEPTONEWTON
        extra["tuned_fe_zn"] = tuned.best_fe / ZEPTONEWTON
        extra["window_fe_zn"] = [tuned.window.fe_low / ZEPTONEWTON,
                                 tuned.window.fe_high / ZEPTONEWTON]

    report = run_vibres_protocol(p, d, camera, duration, stages=args.stages,
                                 branch_prep=args.branch_prep,
                                 radial_noise_frac=args.noise_frac)
    paths = write_bundle(out, report, raw, extra=extra)
    return [os.path.relpath(path, out) for path in paths]


DISPATCH = {
    "steady": cmd_steady,
    "bistable-map": cmd_bistable_map,
    "sweep": cmd_sweep,
    "integrate": cmd_integrate,
    "vibres": cmd_vibres,
}


# ---------------------------------------------------------------------------
# manifest

def _write_manifest(out, command, rc, args, outputs, wall):
    arg_dict = {k: v for k, v in vars(args).items() if k != "config"}
    manifest = {
        "command": command,
        "version": __version__,
        "seed": rc.seed,
        "config": rc.raw,
        "args": arg_dict,
        "outputs": list(outputs),
        "duration_s": wall,
    }
    with open(os.path.join(out, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def rerun(manifest_path, out_dir):
    """Replay a recorded run into out_dir; returns the outputs written.

    The embedded config snapshot and argument set are used verbatim, so a
    rerun reproduces the original artifacts byte for byte.
    """
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    rc = config_from_dict(manifest["config"])
    args = argparse.Namespace(**manifest["args"])
    args.out = out_dir
    args.config = None
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.monotonic()
    outputs = DISPATCH[manifest["command"]](rc, args, out_dir)
    _write_manifest(out_dir, manifest["command"], rc, args, outputs,
                    time.monotonic() - t0)
    return outputs


# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="flat YAML parameter file (default: built-in "
                             "operating point)")
    common.add_argument("--out", metavar="DIR", default="funneltrap_out",
                        help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--format", choices=["csv"], default="csv",
                        help="artifact format (csv only)")

    parser = argparse.ArgumentParser(
        prog="funneltrap",
        description="funnel-trap nonlinear dynamics: steady states, "
                    "hysteresis sweeps, trajectories and weak-force "
                    "amplification")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("steady", parents=[common],
                        help="roots and stability of the response cubic")
    ps.add_argument("--detuning-hz", type=float, nargs="+", default=None,
                    help="detunings to solve at (default: config value)")

    pb = sub.add_parser("bistable-map", parents=[common],
                        help="bistable window boundaries vs drive strength")
    pb.add_argument("--f0-zn", type=float, nargs="+", default=None,
                    help="radial force amplitudes in zN (default: grid "
                         "0.5..30)")

    pw = sub.add_parser("sweep", parents=[common],
                        help="stepped-frequency response with hysteresis")
    pw.add_argument("--direction",
                    choices=["ascending", "descending", "both"],
                    default="both")
    pw.add_argument("--delta-min-hz", type=float, default=-40e3)
    pw.add_argument("--delta-max-hz", type=float, default=-100.0)
    pw.add_argument("--step-hz", type=float, default=50.0)
    pw.add_argument("--dwell-s", type=float, default=0.05)
    pw.add_argument("--drive-zn", type=float, nargs="+", default=None,
                    help="radial force amplitudes in zN (default: five "
                         "log-spaced values up to 30)")
    pw.add_argument("--model", choices=["quasi-static", "envelope"],
                    default="quasi-static")

    pi = sub.add_parser("integrate", parents=[common],
                        help="time-domain trajectory from either model")
    pi.add_argument("--model", choices=["full", "envelope"],
                    default="envelope")
    pi.add_argument("--t-end", dest="t_end", type=float, default=None,
                    help="simulated duration, s")
    pi.add_argument("--dt", type=float, default=None, help="step size, s")
    pi.add_argument("--stride", type=int, default=None,
                    help="output decimation")

    pv = sub.add_parser("vibres", parents=[common],
                        help="three-stage weak-force amplification protocol")
    pv.add_argument("--stages", default="ace",
                    help="subset of 'ace' to run (default: all)")
    pv.add_argument("--duration-s", type=float, default=None,
                    help="record length, s (default: config duration)")
    pv.add_argument("--tune", action="store_true",
                    help="scan the enhancement tone and use the best "
                         "amplitude")
    pv.add_argument("--branch-prep", choices=["lower", "upper"],
                    default="lower")
    pv.add_argument("--noise-frac", type=float, default=0.0,
                    help="optional fractional radial-amplitude noise")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        rc = _resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        t0 = time.monotonic()
        outputs = DISPATCH[args.command](rc, args, args.out)
        _write_manifest(args.out, args.command, rc, args, outputs,
                        time.monotonic() - t0)
    except ParameterError as exc:      # ConfigError included
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

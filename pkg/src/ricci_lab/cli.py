"""Command-line entry points.

Subcommands: simulate, check-estimate {A|B|C}, moser-verify, entropy-trace,
sobolev-estimate, sweep.  All read a JSON config (see harness.py); --seed
and --resolution override the config.  Exit code is nonzero iff a
counterexample flag or contract violation was raised.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .entropy import build_fk, conjugate_evolve, normalize_side, w_entropy
from .harness import (ExperimentConfig, RunReport, build_trajectory, run,
                      sweep, trajectory_trace_rows)


def _load_config(args):
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.resolution is not None:
        cfg.flow.resolution = args.resolution
    return cfg


def _out_dir(args):
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(out, name, payload):
    path = out / name
    path.write_text(payload if isinstance(payload, str)
                    else json.dumps(payload, indent=2, sort_keys=True))
    return path


def cmd_simulate(args):
    cfg = _load_config(args)
    traj = build_trajectory(cfg)
    out = _out_dir(args)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "length", "max_rm", "volume", "lambda"])
        writer.writerows(trajectory_trace_rows(traj))
    _write_json(out, "simulate.json", {
        "blown_up": traj.blown_up, "stamps": len(traj),
        "span": [float(traj.times[0]), float(traj.times[-1])]})
    print(f"wrote {out / 'trajectory.csv'} ({len(traj)} stamps, "
          f"blown_up={traj.blown_up})")
    return 0


def cmd_check_estimate(args):
    cfg = _load_config(args)
    cfg.analysis.checks = [args.theorem]
    report = run(cfg)
    out = _out_dir(args)
    _write_json(out, f"verdict_{args.theorem}.json", report.to_json())
    print(report.to_json())
    return 0 if report.ok else 1


def cmd_moser_verify(args):
    cfg = _load_config(args)
    cfg.analysis.checks = ["moser"]
    report = run(cfg)
    out = _out_dir(args)
    _write_json(out, "moser.json", report.to_json())
    print(json.dumps(report.outputs["moser"], indent=2))
    return 0 if report.ok else 1


def cmd_entropy_trace(args):
    cfg = _load_config(args)
    traj = build_trajectory(cfg)
    acfg = cfg.analysis
    t_k = float(traj.times[-1])
    f_k = build_fk(traj.states[-1], 0.0, acfg.entropy_rk, acfg.entropy_lam,
                   acfg.entropy_delta)
    f_k = normalize_side(traj.states[-1], f_k, acfg.entropy_rk ** 2)
    rows = conjugate_evolve(traj, f_k, t_k, acfg.entropy_rk,
                            return_trace=True)
    out = _out_dir(args)
    path = out / "entropy_trace.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "tau", "entropy", "side_residual"])
        for t, f, resid in rows:
            i = traj.stamp_index(t)
            tau = t_k - t + acfg.entropy_rk ** 2
            fn = normalize_side(traj.states[i], f, tau)
            w = w_entropy(traj.states[i], fn, tau, traj.curvature_at(i))
            writer.writerow([t, tau, w, resid])
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_sobolev_estimate(args):
    cfg = _load_config(args)
    cfg.analysis.checks = ["sobolev"]
    report = run(cfg)
    out = _out_dir(args)
    _write_json(out, "sobolev.json", report.to_json())
    print(json.dumps(report.outputs["sobolev"], indent=2))
    return 0 if report.ok else 1


def cmd_sweep(args):
    cfg = _load_config(args)
    rows = sweep(cfg)
    out = _out_dir(args)
    _write_json(out, "sweep.json", {"cells": rows})
    bad = [r for r in rows if r["status"] == "ok"
           and r["report"]["failures"]]
    errors = [r for r in rows if r["status"] == "error"]
    print(f"{len(rows)} cells: {len(errors)} errored, "
          f"{len(bad)} with contract failures")
    return 1 if bad else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ricci-lab",
        description="Numerical laboratory for reduced Ricci flow curvature "
                    "estimates")
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--resolution", type=int, default=None,
                        help="override the flow grid resolution")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate").set_defaults(func=cmd_simulate)
    pce = sub.add_parser("check-estimate")
    pce.add_argument("theorem", choices=["A", "B", "C"])
    pce.set_defaults(func=cmd_check_estimate)
    sub.add_parser("moser-verify").set_defaults(func=cmd_moser_verify)
    sub.add_parser("entropy-trace").set_defaults(func=cmd_entropy_trace)
    sub.add_parser("sobolev-estimate").set_defaults(func=cmd_sobolev_estimate)
    sub.add_parser("sweep").set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

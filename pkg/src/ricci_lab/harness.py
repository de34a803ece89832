"""Batch orchestration: declarative experiment configs, seeded randomized
runs, parameter sweeps, and report emission.

A config is a single JSON document with geometry / flow / analysis / output
sections (schema_version pins the layout).  Runs are deterministic given
the seed; sweep cells are independent and may run in a process pool sized
by the RICCI_LAB_WORKERS environment variable (serial by default).
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import COARSE_GRID, DEFAULT_GRID, kappa_modulus
from .checkers import (check_extensions, check_theorem_A, check_theorem_B,
                       check_theorem_C, point_pick)
from .constants import constants
from .entropy import build_fk, monotonicity_check, witness_search
from .flow import FlowTrajectory, ModifiedFlowSpec, run_flow
from .geometry import (HomogeneousState, WarpedProfile, flat_disk,
                       perturbed_sphere, round_sphere)
from .moser import solve_subsolution, verify_theorem
from .sobolev import sobolev_bracket

SCHEMA = "ricci-lab/config-v1"


@dataclass
class GeometryConfig:
    family: str = "perturbed_sphere"   # round_sphere | perturbed_sphere |
    n: int = 3                         # flat_disk | homogeneous
    radius: float = 1.0
    amplitude: float = 0.0
    modes: list = field(default_factory=list)   # explicit modulation amps
    length: float = 1.0
    group: str = "su2"
    coefficients: list = field(default_factory=lambda: [1.0, 1.0, 1.0])


@dataclass
class FlowConfig:
    kind: str = "ricci"        # ricci | constant | volume_normalized | static
    lam: float = 0.0
    t_end: float = 0.05
    resolution: int = 128
    stamps: int = 9
    c_stab: float = 0.2


@dataclass
class AnalysisConfig:
    checks: list = field(default_factory=lambda: ["A"])
    x0: float = 0.0
    r0: float = 1.0
    rho: float = 1.0
    kappa: float | None = None
    delta0: float | None = None
    moser_p0: float = 1.5
    moser_a: float = 0.0
    entropy_rk: float = 0.3
    entropy_lam: float = 2.0
    entropy_delta: float = 0.1
    coarse: bool = True


@dataclass
class ExperimentConfig:
    seed: int = 0
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    sweep: dict = field(default_factory=dict)   # dotted path -> value list
    schema_version: str = SCHEMA

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        if rec.get("schema_version", SCHEMA) != SCHEMA:
            raise ValueError(f"unsupported schema {rec.get('schema_version')}")
        return cls(seed=rec.get("seed", 0),
                   geometry=GeometryConfig(**rec.get("geometry", {})),
                   flow=FlowConfig(**rec.get("flow", {})),
                   analysis=AnalysisConfig(**rec.get("analysis", {})),
                   sweep=rec.get("sweep", {}),
                   schema_version=SCHEMA)

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def replaced(self, path, value):
        rec = json.loads(self.to_json())
        node = rec
        *head, last = path.split(".")
        for key in head:
            node = node[key]
        node[last] = value
        return ExperimentConfig.from_json(json.dumps(rec))


def build_geometry(cfg: GeometryConfig, seed=0):
    if cfg.family == "round_sphere":
        return round_sphere(cfg.n, cfg.radius, _resolution_hint(cfg))
    if cfg.family == "perturbed_sphere":
        if cfg.modes:
            return perturbed_sphere(cfg.n, cfg.radius, _resolution_hint(cfg),
                                    amplitudes=cfg.modes)
        return perturbed_sphere(cfg.n, cfg.radius, _resolution_hint(cfg),
                                seed=seed, amplitude=cfg.amplitude)
    if cfg.family == "flat_disk":
        return flat_disk(cfg.n, cfg.length, _resolution_hint(cfg))
    if cfg.family == "homogeneous":
        return HomogeneousState(cfg.group, tuple(cfg.coefficients))
    raise ValueError(f"unknown geometry family {cfg.family!r}")


def _resolution_hint(cfg):
    return getattr(cfg, "_resolution", 128)


def build_trajectory(config: ExperimentConfig):
    gcfg = config.geometry
    fcfg = config.flow
    setattr(gcfg, "_resolution", fcfg.resolution)
    state = build_geometry(gcfg, config.seed)
    if fcfg.kind == "static":
        times = np.linspace(0.0, max(fcfg.t_end, 1e-6), max(2, fcfg.stamps))
        return FlowTrajectory.static(state, times)
    if fcfg.kind == "ricci":
        spec = None
    elif fcfg.kind == "constant":
        spec = ModifiedFlowSpec("constant", fcfg.lam)
    elif fcfg.kind == "volume_normalized":
        spec = ModifiedFlowSpec("volume_normalized")
    else:
        raise ValueError(f"unknown flow kind {fcfg.kind!r}")
    return run_flow(state, fcfg.t_end, spec, stamps=fcfg.stamps,
                    c_stab=fcfg.c_stab)


@dataclass
class RunReport:
    digest: str
    seed: int
    outputs: dict
    failures: list
    timing: float
    resolution: dict

    def to_json(self):
        return json.dumps({
            "digest": self.digest, "seed": self.seed,
            "outputs": self.outputs, "failures": self.failures,
            "timing": self.timing, "resolution": self.resolution,
        }, indent=2, sort_keys=True)

    @property
    def ok(self):
        return not self.failures


def _verdict_payload(v):
    return json.loads(v.to_json())


def run(config: ExperimentConfig):
    """Execute one experiment cell; deterministic given the seed."""
    t_start = time.time()
    acfg = config.analysis
    grid = COARSE_GRID if acfg.coarse else DEFAULT_GRID
    traj = build_trajectory(config)
    outputs = {"blown_up": traj.blown_up,
               "span": [float(traj.times[0]), float(traj.times[-1])],
               "stamps": len(traj)}
    failures = []
    registry = constants(traj.n, kappa=acfg.kappa or 1.0)

    base_kwargs = dict(x0=acfg.x0, r0=acfg.r0, delta0=acfg.delta0,
                       analysis_grid=grid)
    for check in acfg.checks:
        if check in ("A", "B", "C"):
            if check == "A":
                v = check_theorem_A(traj, rho=acfg.rho, kappa=acfg.kappa,
                                    **base_kwargs)
            elif check == "B":
                v = check_theorem_B(traj, **base_kwargs)
            else:
                v = check_theorem_C(traj, **base_kwargs)
            outputs[f"theorem_{check}"] = _verdict_payload(v)
            if v.counterexample:
                failures.append(f"counterexample flag on theorem {check}")
        elif check.startswith("ext"):
            which, base = check.split(":")   # e.g. "ext2:A"
            roman = {"ext1": "I", "ext2": "II"}[which]
            kwargs = dict(base_kwargs)
            if base == "A":
                kwargs.update(rho=acfg.rho, kappa=acfg.kappa)
            v = check_extensions(traj, roman, base, **kwargs)
            outputs[f"theorem_{base}_{which}"] = _verdict_payload(v)
            if v.counterexample:
                failures.append(f"counterexample flag on {check}")
        elif check == "kappa":
            for variant in ("riemann", "scalar"):
                rep = kappa_modulus(traj, acfg.rho, variant, grid=grid)
                outputs[f"kappa_{variant}"] = {
                    "kappa": rep.kappa, "pairs": rep.admissible_pairs,
                    "worst": rep.worst}
        elif check == "moser":
            prof = traj.states[0]
            rng = np.random.default_rng(config.seed + 1)
            if traj.is_warped:
                bump = rng.uniform(0.2, 1.0)
                f0 = 1.0 + bump * np.sin(np.pi * prof.grid
                                         / prof.length) ** 2
                center = 0.5 * prof.length
                # keep within the Ricci-volume upper bound's validity range
                radius = min(0.25 * prof.length, 0.8)
                fields = solve_subsolution(traj, f0, acfg.moser_a)
                rep = verify_theorem(traj, fields, acfg.moser_p0,
                                     acfg.moser_a, center=center,
                                     radius=radius, registry=registry)
            else:
                fields = solve_subsolution(traj, np.ones(1), acfg.moser_a)
                rep = verify_theorem(traj, fields, acfg.moser_p0,
                                     acfg.moser_a, sobolev_c2=10.0,
                                     registry=registry)
            outputs["moser"] = {"bound": rep.bound_at_worst,
                                "sup": rep.sup_measured,
                                "slack": rep.slack,
                                "violated": rep.violated}
            if rep.violated:
                failures.append("moser bound violated")
        elif check == "entropy":
            t_k = float(traj.times[-1])
            fk = build_fk(traj.states[-1], 0.0, acfg.entropy_rk,
                          acfg.entropy_lam, acfg.entropy_delta)
            rep = monotonicity_check(traj, fk, t_k, acfg.entropy_rk)
            outputs["entropy"] = {
                "w_initial": rep.w_initial, "w_terminal": rep.w_terminal,
                "gap": rep.gap, "tolerance": rep.tolerance, "ok": rep.ok,
                "residual": rep.residual_initial}
            if not rep.ok:
                failures.append("entropy monotonicity violated beyond "
                                "tolerance")
        elif check == "witness":
            rep = witness_search(traj, acfg.rho, grid=grid)
            outputs["witness"] = {"found": rep.found,
                                  "searched": rep.searched}
        elif check == "sobolev":
            rep = sobolev_bracket(traj.states[0], 0.0, acfg.r0 / 4.0,
                                  registry, grid)
            outputs["sobolev"] = {
                "cs2_lower": rep.cs2_lower, "cs2_upper": rep.cs2_upper,
                "method": rep.method}
            if rep.cs2_lower > rep.cs2_upper * (1 + 1e-9):
                failures.append("sobolev bracket inverted")
        elif check == "point_pick":
            pick = point_pick(traj, x0=acfg.x0)
            outputs["point_pick"] = (None if pick is None else {
                "label": pick.label, "time": pick.time,
                "curvature": pick.curvature, "verified": pick.verified})
            if pick is not None and not pick.verified:
                failures.append("point-pick post-conditions failed")
        else:
            raise ValueError(f"unknown check {check!r}")

    resolution = {"m": config.flow.resolution, "stamps": len(traj),
                  "grid": "coarse" if acfg.coarse else "default"}
    return RunReport(config.digest(), config.seed, outputs, failures,
                     time.time() - t_start, resolution)


def _run_cell(args):
    config, path, values = args
    cfg = config
    for p, v in zip(path, values):
        cfg = cfg.replaced(p, v)
    try:
        report = run(cfg)
        return {"cell": dict(zip(path, values)), "status": "ok",
                "report": json.loads(report.to_json())}
    except Exception as exc:   # cell isolation: sweeps tolerate failures
        return {"cell": dict(zip(path, values)), "status": "error",
                "error": f"{type(exc).__name__}: {exc}"}


def sweep(config: ExperimentConfig, parameter_grid=None, workers=None):
    """Cartesian sweep over dotted-path parameter lists; returns one row
    per cell with per-cell status."""
    grid = parameter_grid if parameter_grid is not None else config.sweep
    if not grid:
        return []
    paths = sorted(grid)
    combos = list(itertools.product(*[grid[p] for p in paths]))
    jobs = [(config, paths, values) for values in combos]
    if workers is None:
        workers = int(os.environ.get("RICCI_LAB_WORKERS", "1"))
    if workers > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(workers) as pool:
            return pool.map(_run_cell, jobs)
    return [_run_cell(job) for job in jobs]


def trajectory_trace_rows(traj):
    """Per-stamp CSV rows: t, length, max|Rm|, volume, lambda."""
    from ._num import trapz
    from .constants import unit_sphere_volume
    rows = []
    for i in range(len(traj)):
        st = traj.states[i]
        if traj.is_warped:
            vol = unit_sphere_volume(st.n - 1) * trapz(
                st.phi ** (st.n - 1), st.grid)
            length = st.length
        else:
            a, b, c = st.coeffs
            vol = 16.0 * math.pi ** 2 * math.sqrt(a * b * c)
            length = float("nan")
        rows.append((float(traj.times[i]), length, traj.max_rm(i), vol,
                     float(traj.lambdas[i])))
    return rows

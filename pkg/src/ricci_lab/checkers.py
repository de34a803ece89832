"""Hypothesis/conclusion verdicts for the three curvature estimates and
their modified-flow extensions, plus the point-picking diagnostic.

A verdict records, per condition, the worst margin (bound minus value;
positive means satisfied) and where it occurred.  The counterexample flag
is raised only when every hypothesis holds and some conclusion fails beyond
tolerance; since the estimates are theorems, a raised flag means an
artifact bug or a tolerance breach and is treated as a test failure.

All quantifiers over the manifold reduce to meridian intervals: curvature
is radial, and any point within distance d of a meridian point has its
meridian coordinate within d, so interval sups cover the full region.
Quantifiers over time are checked at the recorded stamps (stamp density is
an accuracy knob, reported in the verdict).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import DEFAULT_GRID, ball_stats_state, boundary_distance, diam, kappa_modulus
from .constants import ConstantRegistry, constants
from .flow import convert_modified_to_ricci, FlowTrajectory
from .geometry import WarpedProfile


@dataclass(frozen=True)
class ConditionResult:
    name: str
    ok: bool
    margin: float
    worst: tuple | None = None    # (label, radius-or-none, time)


@dataclass
class EstimateVerdict:
    theorem: str
    applicable: bool
    reasons: list = field(default_factory=list)
    hypotheses: list = field(default_factory=list)
    conclusions: list = field(default_factory=list)
    counterexample: bool = False
    extras: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)

    def finish(self, tol):
        hyp_ok = all(h.ok for h in self.hypotheses)
        concl_ok = all(c.ok for c in self.conclusions)
        self.counterexample = (self.applicable and hyp_ok and not concl_ok)
        self.extras.setdefault("tolerance", tol)
        return self

    def to_json(self):
        def cond(c):
            return {"name": c.name, "ok": bool(c.ok), "margin": c.margin,
                    "worst": c.worst}
        return json.dumps({
            "theorem": self.theorem,
            "applicable": self.applicable,
            "reasons": self.reasons,
            "hypotheses": [cond(c) for c in self.hypotheses],
            "conclusions": [cond(c) for c in self.conclusions],
            "counterexample": self.counterexample,
            "extras": {k: v for k, v in self.extras.items()
                       if isinstance(v, (int, float, str, bool, list))},
            "resolution": self.resolution,
        }, indent=2)


def _positions(traj, i, labels):
    return traj.position_of(np.atleast_1d(labels), i)


def _interval_sup(values, grid, lo, hi):
    """Max of a nodal field over the arclength interval [lo, hi]."""
    mask = (grid >= lo - 1e-12) & (grid <= hi + 1e-12)
    if not mask.any():
        j = int(np.argmin(np.abs(grid - 0.5 * (lo + hi))))
        mask[j] = True
    return float(values[mask].max()), float(grid[mask][int(np.argmax(values[mask]))])


def _interval_min(values, grid, lo, hi):
    mask = (grid >= lo - 1e-12) & (grid <= hi + 1e-12)
    if not mask.any():
        j = int(np.argmin(np.abs(grid - 0.5 * (lo + hi))))
        mask[j] = True
    return float(values[mask].min()), float(grid[mask][int(np.argmin(values[mask]))])


def _ball_integral(traj, i, center_pos, radius, analysis_grid):
    st = ball_stats_state(traj.states[i], float(traj.times[i]), center_pos,
                          radius, traj.curvature_at(i), analysis_grid)
    return st.integral, st.volume


def _check_preconditions(traj, x0, r0, verdict, need_diam=False):
    for i in range(len(traj)):
        pos = float(_positions(traj, i, x0)[0])
        if r0 >= boundary_distance(traj.states[i], pos):
            verdict.applicable = False
            verdict.reasons.append(
                f"r0 exceeds boundary distance at stamp {i}")
            return
        if need_diam and r0 > diam(traj.states[i]) + 1e-12:
            verdict.applicable = False
            verdict.reasons.append(f"r0 exceeds diameter at stamp {i}")
            return


def _conclusion_pointwise(traj, x0, radius_of_t, bound_of_t, name, tol):
    """sup |Rm| over {d(x0, x, t) <= radius(t)} against bound(t)."""
    margin = math.inf
    worst = None
    for i in range(1, len(traj)):
        t = float(traj.times[i])
        rad = radius_of_t(t)
        if rad <= 0:
            continue
        pos = float(_positions(traj, i, x0)[0])
        cf = traj.curvature_at(i)
        sup, at = _interval_sup(cf.rm_norm, traj.states[i].grid,
                                pos - rad, pos + rad)
        m = bound_of_t(t) - sup
        if m < margin:
            margin = m
            worst = (at, rad, t)
    scale = abs(bound_of_t(float(traj.times[-1]))) + 1.0
    return ConditionResult(name, margin >= -tol * scale, margin, worst)


def _conclusion_ball_average(traj, x0, radius_of_t, frac, bound_factor_of_t,
                             name, tol, analysis_grid, averaged):
    """sup |Rm| over the region against
    bound_factor(t) * sup_{s<=t} (I(x, frac*r(t), s) [/ V])^(2/n)."""
    n = traj.n
    margin = math.inf
    worst = None
    for i in range(1, len(traj)):
        t = float(traj.times[i])
        rad = radius_of_t(t)
        if rad <= 0:
            continue
        pos = float(_positions(traj, i, x0)[0])
        grid_i = traj.states[i].grid
        lo = max(0.0, pos - 0.5 * rad)
        hi = min(traj.states[i].length, pos + 0.5 * rad)
        samples = np.linspace(lo, hi, 5)
        labels = traj.label_of(samples, i)
        cf = traj.curvature_at(i)
        for lab, s_i in zip(labels, samples):
            rm_here, _ = _interval_sup(cf.rm_norm, grid_i,
                                       s_i - 1e-9, s_i + 1e-9)
            sup_ratio = 0.0
            for j in range(0, i + 1):
                pos_j = float(_positions(traj, j, lab)[0])
                integ, vol = _ball_integral(traj, j, pos_j, frac * rad,
                                            analysis_grid)
                val = integ / vol if averaged else integ
                sup_ratio = max(sup_ratio, val)
            bound = bound_factor_of_t(t) * sup_ratio ** (2.0 / n)
            m = bound - rm_here
            if m < margin:
                margin = m
                worst = (float(s_i), frac * rad, t)
    scale = max(traj.max_rm(i) for i in range(len(traj))) + 1.0
    return ConditionResult(name, margin >= -tol * scale, margin, worst)


def check_theorem_A(traj, x0=0.0, r0=1.0, rho=1.0, kappa=None, delta0=None,
                    c0=None, registry=None, analysis_grid=DEFAULT_GRID,
                    tol=1e-6):
    """Smallness of the ball curvature integral at a noncollapsed center
    implies the pointwise decay bound and the averaged-window bound."""
    n = traj.n
    if kappa is None:
        kappa = kappa_modulus(traj, rho, grid=analysis_grid).kappa
    registry = registry or constants(n, kappa=kappa if np.isfinite(kappa)
                                     else 1.0)
    delta0 = delta0 if delta0 is not None else registry["delta0_A"]
    c0 = c0 if c0 is not None else registry["c0_A"]
    alpha = registry["alpha_n"]
    eps0 = registry["eps0"]
    eps1 = registry["eps1"]

    v = EstimateVerdict("A", True)
    v.resolution = {"stamps": len(traj), "delta0": delta0, "c0": c0,
                    "kappa": kappa, "rho": rho, "r0": r0}
    if r0 > rho:
        v.applicable = False
        v.reasons.append("r0 exceeds the noncollapsedness scale")
    _check_preconditions(traj, x0, r0, v)
    if not v.applicable:
        return v.finish(tol)

    margin = math.inf
    worst = None
    for i in range(len(traj)):
        pos = float(_positions(traj, i, x0)[0])
        integ, _ = _ball_integral(traj, i, pos, r0, analysis_grid)
        if delta0 - integ < margin:
            margin = delta0 - integ
            worst = (pos, r0, float(traj.times[i]))
    v.hypotheses.append(ConditionResult(
        "ball integral small", margin >= -tol * (delta0 + 1.0), margin,
        worst))

    v.conclusions.append(_conclusion_pointwise(
        traj, x0, lambda t: eps0 * r0,
        lambda t: alpha / t + (eps0 * r0) ** -2, "pointwise decay", tol))
    v.conclusions.append(_conclusion_ball_average(
        traj, x0, lambda t: eps1 * min(r0, math.sqrt(t)), 0.5,
        lambda t: c0 * max(r0 ** -2, 1.0 / t), "averaged window", tol,
        analysis_grid, averaged=False))
    return v.finish(tol)


def check_theorem_B(traj, x0=0.0, r0=1.0, delta0=None, c0=None,
                    registry=None, analysis_grid=DEFAULT_GRID, tol=1e-6):
    """Volume-relative smallness over all centers and scales implies the
    same pointwise decay plus a ninth-radius averaged bound."""
    n = traj.n
    registry = registry or constants(n)
    delta0 = delta0 if delta0 is not None else registry["delta0_B"]
    c0 = c0 if c0 is not None else registry["c0_B"]
    alpha = registry["alpha_n"]
    eps0 = registry["eps0"]
    eps1 = registry["eps1"]

    v = EstimateVerdict("B", True)
    v.resolution = {"stamps": len(traj), "delta0": delta0, "c0": c0,
                    "r0": r0, "x_samples": analysis_grid.centers,
                    "r_samples": analysis_grid.radii}
    _check_preconditions(traj, x0, r0, v, need_diam=True)
    if not v.applicable:
        return v.finish(tol)

    margin = math.inf
    worst = None
    for i in range(len(traj)):
        prof = traj.states[i]
        pos = float(_positions(traj, i, x0)[0])
        lo = max(0.0, pos - 0.5 * r0)
        hi = min(prof.length, pos + 0.5 * r0)
        centers = np.linspace(lo, hi, analysis_grid.centers)
        radii = np.geomspace(max(prof.spacing, 1e-3 * r0), 0.5 * r0, 8)
        for c in centers:
            for r in radii:
                integ, vol = _ball_integral(traj, i, float(c), float(r),
                                            analysis_grid)
                m = delta0 * vol / r ** n - integ
                if m < margin:
                    margin = m
                    worst = (float(c), float(r), float(traj.times[i]))
    v.hypotheses.append(ConditionResult(
        "volume-relative integral small", margin >= -tol, margin, worst))

    v.conclusions.append(_conclusion_pointwise(
        traj, x0, lambda t: eps0 * r0,
        lambda t: alpha / t + (eps0 * r0) ** -2, "pointwise decay", tol))
    v.conclusions.append(_conclusion_ball_average(
        traj, x0, lambda t: eps1 * min(r0, math.sqrt(t)), 1.0 / 9.0,
        lambda t: c0, "ninth-radius average", tol, analysis_grid,
        averaged=True))
    return v.finish(tol)


def check_theorem_C(traj, x0=0.0, r0=1.0, delta0=None, c0=None,
                    registry=None, analysis_grid=DEFAULT_GRID, tol=1e-6):
    """Ricci lower bound plus fixed-ball volume-relative smallness; also
    reports the derived theorem-B margin from the volume-comparison
    reduction."""
    n = traj.n
    registry = registry or constants(n)
    delta0 = delta0 if delta0 is not None else registry["delta0_C"]
    c0 = c0 if c0 is not None else registry["c0_C"]
    alpha = registry["alpha_n"]
    eps0 = registry["eps0"]
    eps1 = registry["eps1"]

    v = EstimateVerdict("C", True)
    v.resolution = {"stamps": len(traj), "delta0": delta0, "c0": c0,
                    "r0": r0}
    _check_preconditions(traj, x0, r0, v, need_diam=True)
    if not v.applicable:
        return v.finish(tol)

    ric_margin = math.inf
    ric_worst = None
    int_margin = math.inf
    int_worst = None
    ric_bound = -(n - 1) / r0 ** 2
    for i in range(len(traj)):
        prof = traj.states[i]
        cf = traj.curvature_at(i)
        pos = float(_positions(traj, i, x0)[0])
        lo, hi = max(0.0, pos - r0), min(prof.length, pos + r0)
        ric_low = np.minimum(cf.ric_rad, cf.ric_orb)
        mn, at = _interval_min(ric_low, prof.grid, lo, hi)
        if mn - ric_bound < ric_margin:
            ric_margin = mn - ric_bound
            ric_worst = (at, r0, float(traj.times[i]))
        integ, vol = _ball_integral(traj, i, pos, r0, analysis_grid)
        m = delta0 * vol / r0 ** n - integ
        if m < int_margin:
            int_margin = m
            int_worst = (pos, r0, float(traj.times[i]))
    v.hypotheses.append(ConditionResult(
        "ricci lower bound", ric_margin >= -tol * abs(ric_bound), ric_margin,
        ric_worst))
    v.hypotheses.append(ConditionResult(
        "fixed-ball integral small", int_margin >= -tol, int_margin,
        int_worst))

    v.conclusions.append(_conclusion_pointwise(
        traj, x0, lambda t: 0.5 * eps0 * r0,
        lambda t: alpha / t + (0.5 * eps0 * r0) ** -2, "pointwise decay",
        tol))
    r_of_t = lambda t: eps1 * min(0.5 * r0, math.sqrt(t))
    v.conclusions.append(_conclusion_ball_average(
        traj, x0, r_of_t, 1.0 / 9.0, lambda t: c0, "ninth-radius average",
        tol, analysis_grid, averaged=True))

    def fixed_ball_factor(t):
        rt = r_of_t(t)
        return c0 * (r0 / rt) ** 2 if rt > 0 else 0.0

    margin = math.inf
    worst = None
    for i in range(1, len(traj)):
        t = float(traj.times[i])
        rt = r_of_t(t)
        if rt <= 0:
            continue
        pos = float(_positions(traj, i, x0)[0])
        cf = traj.curvature_at(i)
        sup, at = _interval_sup(cf.rm_norm, traj.states[i].grid,
                                pos - 0.5 * rt, pos + 0.5 * rt)
        sup_ratio = 0.0
        for j in range(0, i + 1):
            pos_j = float(_positions(traj, j, x0)[0])
            integ, vol = _ball_integral(traj, j, pos_j, r0, analysis_grid)
            sup_ratio = max(sup_ratio, integ / vol)
        m = fixed_ball_factor(t) * sup_ratio ** (2.0 / n) - sup
        if m < margin:
            margin = m
            worst = (at, r0, t)
    scale = max(traj.max_rm(i) for i in range(len(traj))) + 1.0
    v.conclusions.append(ConditionResult(
        "fixed-ball average", margin >= -tol * scale, margin, worst))

    # volume-comparison reduction: the derived theorem-B hypothesis margin
    if all(h.ok for h in v.hypotheses):
        bishop = registry["bishop_c"]
        derived = math.inf
        for i in range(len(traj)):
            prof = traj.states[i]
            pos = float(_positions(traj, i, x0)[0])
            lo = max(0.0, pos - 0.25 * r0)
            hi = min(prof.length, pos + 0.25 * r0)
            for c in np.linspace(lo, hi, 5):
                for r in np.geomspace(max(prof.spacing, 0.02 * r0),
                                      0.5 * r0, 5):
                    integ, vol = _ball_integral(traj, i, float(c), float(r),
                                                analysis_grid)
                    derived = min(derived, 4 ** n * bishop ** 2 * delta0
                                  * vol / r ** n - integ)
        v.extras["derived_B_margin"] = derived
    return v.finish(tol)


# -- point picking ---------------------------------------------------------------


@dataclass(frozen=True)
class PointPick:
    label: float
    time: float
    stamp: int
    node: int
    curvature: float       # Q
    iterations: int
    verified: bool


def point_pick(traj, x0=0.0, epsilon=None, big_a=10.0, registry=None):
    """Perelman-style selection of a controlled high-curvature point.

    Starting from any grid violator of |Rm| > alpha_n/t + eps^-2 with
    t <= eps^2 and d(x0, x, t) < eps, repeatedly jump to points at least
    quadrupling the curvature within the widening admissible set; the
    quadrupling forces termination.  Returns None when no starting violator
    exists.  Post-conditions are re-verified exhaustively on the grid.
    """
    n = traj.n
    registry = registry or constants(n)
    alpha = registry["alpha_n"]
    eps = epsilon if epsilon is not None else registry["eps0"]

    if traj.is_warped:
        def curv(i):
            return traj.curvature_at(i).rm_norm

        def dist_to_x0(i):
            pos0 = float(_positions(traj, i, x0)[0])
            return np.abs(traj.states[i].grid - pos0)
    else:
        # homogeneous toy: one spatial node, curvature constant in space
        def curv(i):
            return np.array([traj.curvature_at(i).rm_norm])

        def dist_to_x0(i):
            return np.zeros(1)

    in_m_alpha = {}
    for i in range(1, len(traj)):
        t = float(traj.times[i])
        in_m_alpha[i] = curv(i) >= alpha / t

    start = None
    start_q = -math.inf
    for i in range(1, len(traj)):
        t = float(traj.times[i])
        if t > eps * eps:
            continue
        ok = (curv(i) > alpha / t + eps ** -2) & (dist_to_x0(i) < eps)
        if ok.any():
            j = int(np.argmax(np.where(ok, curv(i), -np.inf)))
            if curv(i)[j] > start_q:
                start_q = float(curv(i)[j])
                start = (i, j)
    if start is None:
        return None

    i_k, j_k = start
    iters = 0
    while True:
        q_k = float(curv(i_k)[j_k])
        d_k = float(dist_to_x0(i_k)[j_k])
        reach = d_k + big_a / math.sqrt(q_k)
        best = None
        for i in range(1, i_k + 1):
            cand = (in_m_alpha[i] & (dist_to_x0(i) <= reach)
                    & (curv(i) > 4.0 * q_k))
            if cand.any():
                j = int(np.argmax(np.where(cand, curv(i), -np.inf)))
                if best is None or curv(i)[j] > best[2]:
                    best = (i, j, float(curv(i)[j]))
        if best is None:
            break
        i_k, j_k = best[0], best[1]
        iters += 1

    q = float(curv(i_k)[j_k])
    d_bar = float(dist_to_x0(i_k)[j_k])
    verified = q > 1.0
    reach = d_bar + big_a / math.sqrt(q)
    for i in range(1, i_k + 1):
        sel = in_m_alpha[i] & (dist_to_x0(i) <= reach)
        if sel.any() and float(curv(i)[sel].max()) > 4.0 * q * (1 + 1e-12):
            verified = False
    label = (float(traj.materials[i_k][j_k]) if traj.is_warped else 0.0)
    return PointPick(label, float(traj.times[i_k]), i_k, j_k, q, iters,
                     verified)


# -- extensions ------------------------------------------------------------------


_BASE_CHECKERS = {"A": check_theorem_A, "B": check_theorem_B,
                  "C": check_theorem_C}


def check_extensions(traj, which, base_theorem, r0=1.0, **kwargs):
    """Modified-flow extensions: I records the extra quantity
    r0^2 |min(inf lam, 0)|; II converts to an unmodified flow, re-runs the
    base checker there and reports both verdicts."""
    if which not in ("I", "II"):
        raise ValueError("extension is 'I' or 'II'")
    base = _BASE_CHECKERS[base_theorem]
    if which == "I":
        extra = r0 * r0 * abs(min(traj.inf_lambda(), 0.0))
        if not math.isfinite(extra):
            v = EstimateVerdict(f"{base_theorem}-ext1", False,
                                reasons=["extension quantity not finite"])
            return v.finish(kwargs.get("tol", 1e-6))
        v = base(traj, r0=r0, **kwargs)
        v.theorem = f"{base_theorem}-ext1"
        v.extras["extension_quantity"] = extra
        return v
    extra = abs(min(traj.inf_window_integral(), 0.0))
    if not math.isfinite(extra):
        v = EstimateVerdict(f"{base_theorem}-ext2", False,
                            reasons=["extension quantity not finite"])
        return v.finish(kwargs.get("tol", 1e-6))
    converted = convert_modified_to_ricci(traj)
    v = base(converted, r0=r0, **kwargs)
    v.theorem = f"{base_theorem}-ext2"
    v.extras["extension_quantity"] = extra
    v.extras["converted_span"] = list(converted.span)
    v.extras["time_dilation_end"] = float(
        math.exp(-traj.lambda_integrals[-1]))
    return v

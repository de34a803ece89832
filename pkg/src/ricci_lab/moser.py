"""The explicit parabolic sup bound from Moser iteration, a forward solver
for linear parabolic subsolutions on evolving reduced metrics, and the
verification harness comparing measured sups against the bound.

For a nonnegative f with df/dt <= Lap f + a f on [0, T] and a ball
B(x0, R, 0), the bound reads

    sup f <= (1+2/n)^(sigma_n/p0) * C_S2^(n/p0)
             * (a p0 + gamma/2 + (n/2)(1+n/2)^2/t + (n+2)^2 e^(-lam_* T)/(4R^2))^((n+2)/(2 p0))
             * (int_0^T int_B f^p0 dvol dt)^(1/p0)

on {d_{g(0)}(x0, x) <= R/2, 0 < t <= T}, where sigma_n = sum 2k/(1+2/n)^k
= n(n+2)/2, gamma is the max trace of dg/dt on the cylinder, lam_* its
minimum eigenvalue, and C_S2 the max over time of the ball's L^2 Sobolev
constant.  The ball-at-time-T variant replaces -lam_* by the maximum
eigenvalue lam^*.

Cylinder extrema of dg/dt are evaluated from the flow identity
dg/dt = -2 Ric + lam g at the recorded stamps (exact pointwise; discrete
extrema converge from below, the conservative direction for the bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._num import trapz
from .constants import sigma_series_value
from .geometry import HomogeneousState, WarpedProfile
from .sobolev import sobolev_upper


def sigma_n(n):
    """Exponent sum of the iteration; closed form n(n+2)/2."""
    if n < 1:
        raise ValueError("need n >= 1")
    return sigma_series_value(n)


@dataclass(frozen=True)
class MoserParams:
    n: int
    p0: float
    a: float
    t: float
    big_t: float
    radius: float
    gamma: float            # max trace of dg/dt on the cylinder
    lam_star: float         # min eigenvalue of dg/dt (ball-at-0 variant)
    sobolev_c2: float
    spacetime_integral: float

    def __post_init__(self):
        if self.p0 <= 1:
            raise ValueError("need p0 > 1")
        if not (0 < self.t <= self.big_t):
            raise ValueError("need 0 < t <= T")
        if self.radius <= 0 or self.a < 0 or self.sobolev_c2 < 0:
            raise ValueError("invalid Moser parameters")
        if self.spacetime_integral < 0:
            raise ValueError("spacetime integral must be nonnegative")


def moser_bound(p: MoserParams):
    """The printed sup bound, evaluated exactly as stated."""
    n = p.n
    mu_factor = (1.0 + 2.0 / n) ** (sigma_n(n) / p.p0)
    sob = p.sobolev_c2 ** (n / p.p0)
    inner = (p.a * p.p0 + 0.5 * p.gamma
             + 0.5 * n * (1.0 + 0.5 * n) ** 2 / p.t
             + (n + 2) ** 2 * math.exp(-p.lam_star * p.big_t)
             / (4.0 * p.radius ** 2))
    return (mu_factor * sob * inner ** ((n + 2) / (2.0 * p.p0))
            * p.spacetime_integral ** (1.0 / p.p0))


@dataclass(frozen=True)
class MoserReport:
    bound_at_worst: float
    sup_measured: float
    slack: float            # min over stamps of bound(t)/sup(t)
    violated: bool
    params: MoserParams


# -- parabolic subsolution solver ------------------------------------------------


class CFLError(RuntimeError):
    pass


def _laplacian_radial(f, profile):
    """Radial Laplacian f'' + (n-1)(phi'/phi) f' with the pole limit
    n * f''(0) (even extension)."""
    from .geometry import _ghost_extend
    h = profile.spacing
    n = profile.n
    phi = profile.phi
    fe = np.concatenate([f[2:0:-1], f, f[-2:-4:-1]])     # even extension
    f1 = (fe[3:-1] - fe[1:-3]) / (2.0 * h)
    f2 = (fe[1:-3] - 2.0 * fe[2:-2] + fe[3:-1]) / (h * h)
    pe = _ghost_extend(phi, profile.topology)
    phi1 = (pe[:-4] - 8.0 * pe[1:-3] + 8.0 * pe[3:-1] - pe[4:]) / (12.0 * h)
    lap = np.empty_like(f)
    inner = slice(1, -1)
    lap[inner] = f2[inner] + (n - 1) * phi1[inner] / phi[inner] * f1[inner]
    lap[0] = n * f2[0]
    lap[-1] = n * f2[-1]
    return lap


def solve_subsolution(traj, f0, a=0.0, c_stab=0.8):
    """March df/dt = Lap f + a f (the extremal subsolution) on the evolving
    metric; returns the list of nodal fields at the trajectory stamps.

    Nonnegativity of f0 is preserved (discrete maximum principle under the
    CFL step; the reaction term is applied as an exact integrating factor).
    Fields between stamps live on the stamp whose interval covers them and
    are transported to the next stamp at fixed material points.
    """
    if np.any(np.asarray(f0) < 0):
        raise ValueError("subsolution solver expects nonnegative data")
    if a < 0:
        raise ValueError("zeroth-order coefficient must be nonnegative")
    if not traj.is_warped:
        return _solve_subsolution_homogeneous(traj, f0, a)
    fields = [np.asarray(f0, float).copy()]
    f = fields[0].copy()
    for i in range(len(traj) - 1):
        profile = traj.states[i]
        h = profile.spacing
        t0, t1 = float(traj.times[i]), float(traj.times[i + 1])
        dt_cfl = c_stab * h * h / (2.0 * profile.n)
        if dt_cfl <= 0:
            raise CFLError("degenerate grid")
        steps = max(1, int(math.ceil((t1 - t0) / dt_cfl)))
        dt = (t1 - t0) / steps
        for _ in range(steps):
            f = (f + dt * _laplacian_radial(f, profile)) * math.exp(a * dt)
            if f.min() < -1e-12 * max(1.0, f.max()):
                raise CFLError("maximum principle violated; shrink the step")
            f = np.maximum(f, 0.0)
        f = traj.transport_field(f, i, i + 1)
        fields.append(f.copy())
    return fields


def _solve_subsolution_homogeneous(traj, f0, a):
    """Spatially constant data on homogeneous states: Lap f = 0."""
    f0 = float(np.asarray(f0).reshape(-1)[0])
    return [np.array([f0 * math.exp(a * float(t))]) for t in traj.times]


# -- cylinder measurement and verification ---------------------------------------


def metric_rate_extrema(traj, mask_fn=None):
    """(gamma, lam_star, lam_sup): max trace and min/max eigenvalue of
    dg/dt = -2 Ric + lam g over the stamped cylinder, relative to g.
    Constant-in-time families have dg/dt = 0."""
    if not traj.is_flow:
        return 0.0, 0.0, 0.0
    gamma = -math.inf
    lam_min = math.inf
    lam_max = -math.inf
    for i in range(len(traj)):
        cf = traj.curvature_at(i)
        lam = float(traj.lambdas[i])
        if traj.is_warped:
            mask = (mask_fn(i) if mask_fn is not None
                    else np.ones(len(traj.states[i].grid), bool))
            if not mask.any():
                continue
            trace = -2.0 * cf.scalar[mask] + traj.n * lam
            eig_rad = -2.0 * cf.ric_rad[mask] + lam
            eig_orb = -2.0 * cf.ric_orb[mask] + lam
            gamma = max(gamma, float(trace.max()))
            lam_min = min(lam_min, float(eig_rad.min()), float(eig_orb.min()))
            lam_max = max(lam_max, float(eig_rad.max()), float(eig_orb.max()))
        else:
            ric = np.asarray(cf.ricci)
            gamma = max(gamma, float((-2.0 * ric + lam).sum()))
            lam_min = min(lam_min, float((-2.0 * ric + lam).min()))
            lam_max = max(lam_max, float((-2.0 * ric + lam).max()))
    return gamma, lam_min, lam_max


def spacetime_integral(traj, fields, center, radius, p0):
    """int_0^T int_{B(x0,R,0)} f^p0 dvol_{g(t)} dt with the ball fixed by
    material labels from the initial stamp."""
    if not traj.is_warped:
        vols = []
        for i in range(len(traj)):
            a, b, c = traj.states[i].coeffs
            vols.append(16.0 * math.pi ** 2 * math.sqrt(a * b * c)
                        * float(fields[i][0]) ** p0)
        return float(trapz(np.asarray(vols), traj.times))
    base = traj.states[0]
    ball_labels = np.abs(base.grid - center) <= radius  # labels at t=0
    label_lo = center - radius
    label_hi = center + radius
    per_stamp = []
    n = traj.n
    from .constants import unit_sphere_volume
    sig = unit_sphere_volume(n - 1)
    for i in range(len(traj)):
        prof = traj.states[i]
        labels = traj.materials[i]
        inside = (labels >= label_lo) & (labels <= label_hi)
        w = np.where(inside, prof.phi ** (n - 1), 0.0)
        per_stamp.append(sig * trapz(np.asarray(fields[i]) ** p0 * w,
                                     prof.grid))
    del ball_labels
    return float(trapz(np.asarray(per_stamp), traj.times))


def verify_theorem(traj, fields, p0, a, center=0.0, radius=None,
                   sobolev_c2=None, variant="initial", registry=None):
    """Measure the cylinder data from the trajectory, evaluate the bound and
    compare against the measured sup of the fields on the admissible set
    {d_{g(0)}(x0, x) <= R/2, 0 < t <= T}."""
    if variant not in ("initial", "final"):
        raise ValueError("variant is 'initial' or 'final'")
    n = traj.n
    big_t = float(traj.times[-1] - traj.times[0])
    if big_t <= 0:
        raise ValueError("cylinder needs positive time extent")
    if traj.is_warped:
        base = traj.states[0] if variant == "initial" else traj.states[-1]
        radius = radius if radius is not None else 0.25 * base.length

        def mask_fn(i):
            return np.abs(traj.materials[i] - center) <= radius

        gamma, lam_min, lam_max = metric_rate_extrema(traj, mask_fn)
        if sobolev_c2 is None:
            vals = [sobolev_upper(traj.states[i],
                                  float(traj.position_of([center], i)[0]),
                                  radius, registry)[0]
                    for i in range(len(traj))]
            sobolev_c2 = max(vals)
        lam_eff = lam_min if variant == "initial" else -lam_max
        integral = spacetime_integral(traj, fields, center, radius, p0)
        half = radius / 2.0
        sup_f = 0.0
        slack = math.inf
        worst = None
        for i in range(1, len(traj)):
            inside = np.abs(traj.materials[i] - center) <= half
            if not inside.any():
                continue
            s_i = float(np.asarray(fields[i])[inside].max())
            sup_f = max(sup_f, s_i)
            params_i = MoserParams(n, p0, a, float(traj.times[i]), big_t,
                                   radius, gamma, lam_eff, sobolev_c2,
                                   integral)
            b_i = moser_bound(params_i)
            ratio = b_i / s_i if s_i > 0 else math.inf
            if ratio < slack:
                slack = ratio
                worst = (b_i, s_i, params_i)
        if worst is None:
            params = MoserParams(n, p0, a, big_t, big_t, radius, gamma,
                                 lam_eff, sobolev_c2, integral)
            return MoserReport(moser_bound(params), sup_f, math.inf, False,
                               params)
        return MoserReport(worst[0], sup_f, slack, slack < 1.0 - 1e-9,
                           worst[2])

    # homogeneous: spatially constant fields, whole manifold is the ball
    gamma, lam_min, lam_max = metric_rate_extrema(traj)
    radius = radius if radius is not None else 1.0
    if sobolev_c2 is None:
        raise ValueError("pass sobolev_c2 for homogeneous cylinders")
    sup_f = max(float(np.asarray(f).max()) for f in fields[1:])
    integral = spacetime_integral(traj, fields, 0.0, radius, p0)
    params = MoserParams(n, p0, a, big_t, big_t, radius, gamma,
                         lam_min if variant == "initial" else -lam_max,
                         sobolev_c2, integral)
    bound = moser_bound(params)
    return MoserReport(bound, sup_f, bound / sup_f if sup_f else math.inf,
                       sup_f > bound * (1 + 1e-9), params)


@dataclass(frozen=True)
class SubsolutionCheck:
    max_residual: float
    empirical_constant: float
    tolerance: float
    ok: bool


def curvature_subsolution_check(traj, registry_c=8.0, tol_factor=2.0):
    """Check d|Rm|/dt <= Lap|Rm| + c |Rm|^2 at interior stamps, at fixed
    material points; reports the smallest constant validating the run.

    The tolerance scales with h (time-difference and stencil errors); the
    registry constant is confirmed when the residual clears it.
    """
    if len(traj) < 3:
        raise ValueError("need at least three stamps")
    worst_resid = -math.inf
    emp_c = 0.0
    h = traj.states[0].spacing if traj.is_warped else None
    for i in range(1, len(traj) - 1):
        dt = float(traj.times[i + 1] - traj.times[i - 1])
        if traj.is_warped:
            prof = traj.states[i]
            rm = traj.curvature_at(i).rm_norm
            rm_prev = traj.transport_field(traj.curvature_at(i - 1).rm_norm,
                                           i - 1, i)
            rm_next = traj.transport_field(traj.curvature_at(i + 1).rm_norm,
                                           i + 1, i)
            ddt = (rm_next - rm_prev) / dt
            lap = _laplacian_radial(rm, prof)
            sl = slice(3, -3)   # collar values are continuation estimates
            resid = ddt[sl] - lap[sl] - registry_c * rm[sl] ** 2
            worst_resid = max(worst_resid, float(resid.max()))
            with np.errstate(divide="ignore", invalid="ignore"):
                cc = (ddt[sl] - lap[sl]) / rm[sl] ** 2
            cc = cc[np.isfinite(cc)]
            if len(cc):
                emp_c = max(emp_c, float(cc.max()))
        else:
            rm = traj.curvature_at(i).rm_norm
            ddt = (traj.curvature_at(i + 1).rm_norm
                   - traj.curvature_at(i - 1).rm_norm) / dt
            worst_resid = max(worst_resid, ddt - registry_c * rm ** 2)
            emp_c = max(emp_c, ddt / rm ** 2 if rm > 0 else 0.0)
    scale = max(traj.max_rm(i) for i in range(len(traj)))
    tol = tol_factor * (h if h is not None else 0.01) * scale ** 2
    return SubsolutionCheck(worst_resid, emp_c, tol, worst_resid <= tol)

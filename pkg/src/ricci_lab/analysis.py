"""Metric-measure quantities on reduced states: distances, geodesic balls,
volumes, curvature integrals, comparison ratios, noncollapsedness moduli.

Points on a warped sphere are (s, psi): radial arclength plus the angle to a
reference fiber point on the orbit sphere.  Distances reduce to the totally
geodesic 2-surface of revolution ds^2 = dr^2 + phi^2 dpsi^2 spanned by the
two fiber directions.  Pole-centered balls are exact (meridian distance is
the arclength); off-axis centers use a fan of geodesics shot with the
Clairaut invariant c = phi(s_c) sin(beta), splatted onto an (s, psi) grid
with a local-metric correction, upper-bounded by the through-pole paths
s_c + s and (L - s_c) + (L - s).  Every distance candidate is the length of
an actual path, so the field is an upper bound on the true distance that
converges as the fan and grid refine.  Exact cut-locus geometry is out of
scope; the field resolution is reported through AnalysisGrid.

Ball volumes smooth the indicator over one field cell so that volumes vary
continuously in the radius (the kappa searches scan radii).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._num import cumtrapz0, trapz
from .constants import unit_ball_volume, unit_sphere_volume
from .geometry import BAND, DISK, SPHERE, WarpedProfile, curvature_warped


@dataclass(frozen=True)
class AnalysisGrid:
    """Resolution knobs for distance fields and search grids."""

    field_s_nodes: int = 193      # meridian nodes of the distance field
    field_psi_nodes: int = 97     # fiber-angle nodes on [0, pi]
    rays: int = 768               # geodesic fan size
    step_factor: float = 0.5      # ray step as a fraction of the field cell
    radii: int = 32               # radii per kappa search
    centers: int = 9              # meridian centers per search grid

    def psi_nodes(self):
        return np.linspace(0.0, math.pi, self.field_psi_nodes)


DEFAULT_GRID = AnalysisGrid()
COARSE_GRID = AnalysisGrid(field_s_nodes=129, field_psi_nodes=65, rays=384,
                           centers=5)


@dataclass(frozen=True)
class BallStats:
    center: float
    radius: float
    time: float
    volume: float
    integral: float           # int_B |Rm|^(n/2) dvol
    sup_rm: float
    sup_scalar: float
    clamped: bool = False     # radius exceeded the representable domain


# -- distance machinery --------------------------------------------------------


def _profile_interpolants(profile):
    cf = curvature_warped(profile)
    # phi' from the curvature module's quotient is noisy near poles; use the
    # direct stencil values through the ghost extension instead
    from .geometry import _ghost_extend
    h = profile.spacing
    pe = _ghost_extend(profile.phi, profile.topology)
    dphi = (pe[:-4] - 8.0 * pe[1:-3] + 8.0 * pe[3:-1] - pe[4:]) / (12.0 * h)
    return cf, dphi


@lru_cache(maxsize=256)
def _distance_field_cached(profile, center, grid_spec):
    return _distance_field(profile, center, AnalysisGrid(*grid_spec))


def distance_field(profile, center, grid=DEFAULT_GRID):
    """Distance from (center, 0) to every (s_i, psi_j) node; returns
    (s_nodes, psi_nodes, D)."""
    key = (grid.field_s_nodes, grid.field_psi_nodes, grid.rays,
           grid.step_factor, grid.radii, grid.centers)
    return _distance_field_cached(profile, float(center), key)


def _distance_field(profile, center, grid):
    length = profile.length
    s_nodes = np.linspace(0.0, length, grid.field_s_nodes)
    psi = grid.psi_nodes()
    ds_grid = s_nodes[1] - s_nodes[0]
    dpsi = psi[1] - psi[0]
    phi_nodes = np.interp(s_nodes, profile.grid, profile.phi)

    # through-pole and meridian candidates (exact path lengths)
    D = np.minimum(center + s_nodes,
                   (length - center) + (length - s_nodes))
    D = np.repeat(D[:, None], len(psi), axis=1)
    D[:, 0] = np.minimum(D[:, 0], np.abs(s_nodes - center))

    if 0.0 < center < length:
        _splat_fan(profile, center, s_nodes, psi, phi_nodes, D, grid)
    else:
        # pole center: meridian distance, independent of the fiber angle
        D = np.repeat(np.abs(s_nodes - (0.0 if center <= 0 else length))[:, None],
                      len(psi), axis=1)
    return s_nodes, psi, D


def _splat_fan(profile, center, s_nodes, psi, phi_nodes, D, grid):
    length = profile.length
    ds_grid = s_nodes[1] - s_nodes[0]
    dpsi = psi[1] - psi[0]
    phi_c = float(np.interp(center, profile.grid, profile.phi))
    _, dphi = _profile_interpolants(profile)
    pgrid, pphi = profile.grid, profile.phi

    beta = (np.arange(grid.rays) + 0.5) * math.pi / grid.rays
    r = np.full(grid.rays, center)
    u = np.cos(beta)
    ang = np.zeros(grid.rays)
    sig = np.zeros(grid.rays)
    c = phi_c * np.sin(beta)
    alive = np.ones(grid.rays, bool)
    ds_base = grid.step_factor * ds_grid
    max_sigma = 1.05 * length
    edge = max(2.0 * profile.spacing, 1e-3 * length)
    budget = int(6.0 * max_sigma / ds_base)

    def accel(rr):
        ph = np.clip(np.interp(rr, pgrid, pphi), 1e-30, None)
        dp = np.interp(rr, pgrid, dphi)
        return c * c * dp / ph ** 3, ph

    for _ in range(budget):
        # midpoint step of r'' = c^2 phi'/phi^3, psi' = c/phi^2; grazing
        # rays (fast fiber rotation) take shorter steps in arclength
        a1, ph1 = accel(r)
        ds = np.minimum(ds_base, 0.4 * dpsi * ph1 ** 2 / np.maximum(c, 1e-30))
        r_mid = r + 0.5 * ds * u
        u_mid = u + 0.5 * ds * a1
        a2, ph2 = accel(np.clip(r_mid, 0.0, length))
        r_new = r + ds * u_mid
        u_new = u + ds * a2
        ang_new = ang + ds * c / ph2 ** 2
        live = alive & (r_new > edge) & (r_new < length - edge) \
            & (sig + ds < max_sigma) & (ang_new < math.pi + dpsi)
        r = np.where(live, r_new, r)
        u = np.where(live, u_new, u)
        ang = np.where(live, ang_new, ang)
        sig = np.where(live, sig + ds, sig)
        alive = live
        if not alive.any():
            break
        rr, aa, ss = r[alive], np.minimum(ang[alive], math.pi), sig[alive]
        i0 = np.clip((rr / ds_grid).astype(int), 0, len(s_nodes) - 2)
        j0 = np.clip((aa / dpsi).astype(int), 0, len(psi) - 2)
        for di in (0, 1):
            for dj in (0, 1):
                ii, jj = i0 + di, j0 + dj
                dloc = np.hypot(s_nodes[ii] - rr,
                                phi_nodes[ii] * (psi[jj] - aa))
                np.minimum.at(D, (ii, jj), ss + dloc)


def distance(state, s1, s2, fiber_angle=0.0, grid=DEFAULT_GRID):
    """Distance between (s1, 0) and (s2, fiber_angle) on a warped state.

    Same-fiber pairs and pole-anchored pairs are exact (the meridian
    realizes the arclength lower bound); general pairs interpolate the
    geodesic-fan field.
    """
    if not isinstance(state, WarpedProfile):
        raise TypeError("distances are defined for warped states only")
    length = state.length
    psi = abs(float(fiber_angle)) % (2.0 * math.pi)
    if psi > math.pi:
        psi = 2.0 * math.pi - psi
    if psi < 1e-12:
        return abs(s2 - s1)
    if s1 <= 0.0 or s1 >= length:
        return abs(s2 - s1) if s1 <= 0.0 else abs(s2 - s1)
    if s2 <= 0.0 or s2 >= length:
        return abs(s2 - s1)
    s_nodes, psis, D = distance_field(state, s1, grid)
    i = np.searchsorted(s_nodes, s2) - 1
    i = min(max(i, 0), len(s_nodes) - 2)
    j = np.searchsorted(psis, psi) - 1
    j = min(max(j, 0), len(psis) - 2)
    fx = (s2 - s_nodes[i]) / (s_nodes[i + 1] - s_nodes[i])
    fy = (psi - psis[j]) / (psis[j + 1] - psis[j])
    val = ((1 - fx) * (1 - fy) * D[i, j] + fx * (1 - fy) * D[i + 1, j]
           + (1 - fx) * fy * D[i, j + 1] + fx * fy * D[i + 1, j + 1])
    return float(min(val, s1 + s2, (length - s1) + (length - s2)))


def boundary_distance(state, s):
    """Distance to the boundary; infinite on closed spheres."""
    if state.topology == SPHERE:
        return math.inf
    if state.topology == DISK:
        return state.length - s
    return min(s, state.length - s)


def diam(state):
    """Diameter.  On sphere profiles through-pole paths cap every distance
    at L and the pole pair realizes it, so the diameter is exactly L; open
    topologies report the same meridian length as a lower bound."""
    return state.length


# -- ball statistics -----------------------------------------------------------


def _pole_ball_quadrature(profile, weight, r, from_right=False):
    """Integral of `weight` (nodal samples) over the ball of radius r around
    a pole, with an exact partial cell at the sphere boundary."""
    s = profile.grid
    w = weight[::-1] if from_right else weight
    r = min(r, profile.length)
    j = int(np.searchsorted(s, r))
    if j == 0:
        return 0.0
    full = trapz(w[:j], s[:j])
    if j < len(s) and s[j - 1] < r:
        frac = (r - s[j - 1]) / (s[j] - s[j - 1])
        w_r = w[j - 1] + frac * (w[j] - w[j - 1])
        full += 0.5 * (w[j - 1] + w_r) * (r - s[j - 1])
    return float(full)


def ball_stats(traj, t, center, r, grid=DEFAULT_GRID):
    """Volume, L^(n/2) curvature integral and curvature sups of B(center, r)
    at the trajectory stamp nearest t."""
    i = traj.stamp_index(t)
    return ball_stats_state(traj.states[i], float(traj.times[i]), center, r,
                            traj.curvature_at(i), grid)


def ball_stats_state(profile, t, center, r, cf=None, grid=DEFAULT_GRID):
    if r <= 0:
        raise ValueError("ball radius must be positive")
    cf = cf if cf is not None else curvature_warped(profile)
    n = profile.n
    length = profile.length
    sigma_orb = unit_sphere_volume(n - 1)
    rm_pow = cf.rm_norm ** (n / 2.0)
    clamped = r > length  # no point of the profile is farther than L

    if center <= 0.0 or center >= length:
        from_right = center >= length
        w_vol = sigma_orb * profile.phi ** (n - 1)
        vol = _pole_ball_quadrature(profile, w_vol, r, from_right)
        integ = _pole_ball_quadrature(profile, w_vol * rm_pow, r, from_right)
        s_rel = length - profile.grid if from_right else profile.grid
        mask = s_rel <= min(r, length) + 1e-12
        sup_rm = float(cf.rm_norm[mask].max())
        sup_sc = float(cf.scalar[mask].max())
        return BallStats(float(center), float(r), t, vol, integ, sup_rm,
                         sup_sc, clamped)

    s_nodes, psi, D = distance_field(profile, center, grid)
    phi_nodes = np.interp(s_nodes, profile.grid, profile.phi)
    rm_nodes = np.interp(s_nodes, profile.grid, cf.rm_norm)
    sc_nodes = np.interp(s_nodes, profile.grid, cf.scalar)
    rmp_nodes = np.interp(s_nodes, profile.grid, rm_pow)
    cell = s_nodes[1] - s_nodes[0]
    sigma_fib = unit_sphere_volume(n - 2) if n > 2 else 2.0
    w_ang = np.sin(psi) ** (n - 2)
    frac = np.clip((r - D) / cell + 0.5, 0.0, 1.0)
    meas = (phi_nodes ** (n - 1))[:, None] * w_ang[None, :] * frac
    vol = sigma_fib * trapz(trapz(meas, psi, axis=1), s_nodes)
    integ = sigma_fib * trapz(
        trapz(meas * rmp_nodes[:, None], psi, axis=1), s_nodes)

    # Balls a few cells wide fall below the field resolution; there the
    # geodesic-ball volume expansion V = w_n r^n (1 - R r^2/(6(n+2)) + ...)
    # is the better estimate (and exact to O((K r^2)^2)), provided the ball
    # stays clear of any boundary.
    res = resolvable_radius(profile, center, grid)
    blend_lo, blend_hi = 2.5 * res, 4.0 * res
    if r < blend_hi and r < boundary_distance(profile, center):
        rm_c = float(np.interp(center, profile.grid, cf.rm_norm))
        sc_c = float(np.interp(center, profile.grid, cf.scalar))
        v_exp = unit_ball_volume(n) * r ** n * (
            1.0 - sc_c * r * r / (6.0 * (n + 2)))
        i_exp = v_exp * rm_c ** (n / 2.0)
        mix = np.clip((r - blend_lo) / (blend_hi - blend_lo), 0.0, 1.0)
        vol = mix * vol + (1.0 - mix) * v_exp
        integ = mix * integ + (1.0 - mix) * i_exp

    inside = D <= r + 0.5 * cell
    if not inside.any():
        inside = D <= D.min() + 1e-12
    sup_rm = float((rm_nodes[:, None] * inside).max())
    sup_sc = float(np.where(inside, sc_nodes[:, None], -np.inf).max())
    return BallStats(float(center), float(r), t, float(vol), float(integ),
                     sup_rm, sup_sc, clamped)


def ball_volume(profile, center, r, grid=DEFAULT_GRID):
    return ball_stats_state(profile, 0.0, center, r, grid=grid).volume


# -- model spaces and comparison -----------------------------------------------


def model_volume(kappa, r, n, samples=2049):
    """Volume of the r-ball in the constant-curvature model space."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return 0.0
    if kappa > 0:
        r = min(r, math.pi / math.sqrt(kappa))
    u = np.linspace(0.0, r, samples)
    if kappa > 0:
        sk = np.sin(np.sqrt(kappa) * u) / math.sqrt(kappa)
    elif kappa < 0:
        sk = np.sinh(np.sqrt(-kappa) * u) / math.sqrt(-kappa)
    else:
        sk = u
    return float(unit_sphere_volume(n - 1) * trapz(sk ** (n - 1), u))


@dataclass(frozen=True)
class ComparisonReport:
    ratio: float
    bound: float
    hypothesis_ok: bool
    violated: bool
    ric_min: float


def bishop_gromov_ratio(state, center, r_small, r_big, tol=1e-3,
                        grid=DEFAULT_GRID):
    """V(x,R)/V(x,r) against the curvature -1 model ratio, with the
    Ric >= -(n-1) hypothesis checked on the larger ball."""
    if not (0 < r_small < r_big):
        raise ValueError("need 0 < r < R")
    n = state.n
    cf = curvature_warped(state)
    stats_r = ball_stats_state(state, 0.0, center, r_small, cf, grid)
    stats_R = ball_stats_state(state, 0.0, center, r_big, cf, grid)
    # Ricci minimum over the big ball
    if center <= 0.0 or center >= state.length:
        s_rel = (state.length - state.grid if center >= state.length
                 else state.grid)
        mask = s_rel <= min(r_big, state.length) + 1e-12
    else:
        mask = np.ones(len(state.grid), bool)
        s_nodes, psi, D = distance_field(state, center, grid)
        reach = np.interp(state.grid, s_nodes, D.min(axis=1))
        mask = reach <= r_big + state.spacing
    ric_min = float(min(cf.ric_rad[mask].min(), cf.ric_orb[mask].min()))
    hypothesis_ok = ric_min >= -(n - 1) * (1.0 + tol) - tol
    ratio = stats_R.volume / stats_r.volume
    bound = model_volume(-1.0, r_big, n) / model_volume(-1.0, r_small, n)
    violated = hypothesis_ok and ratio > bound * (1.0 + tol)
    return ComparisonReport(ratio, bound, hypothesis_ok, violated, ric_min)


# -- noncollapsedness ----------------------------------------------------------

RIEMANN, SCALAR = "riemann", "scalar"


@dataclass(frozen=True)
class KappaReport:
    kappa: float
    variant: str
    scale: float
    admissible_pairs: int
    worst: tuple | None      # (center, radius, time, volume)
    resolution: AnalysisGrid


def _sup_curv_profile(profile, cf, center, variant, grid):
    """(sorted distances, running max) of the variant's curvature around the
    given center; sup over B(center, r) is then a binary search."""
    values = cf.rm_norm if variant == RIEMANN else cf.scalar
    if center <= 0.0 or center >= profile.length:
        d = (profile.length - profile.grid if center >= profile.length
             else profile.grid)
        vals = values
    else:
        s_nodes, psi, D = distance_field(profile, center, grid)
        d = D.min(axis=1)
        vals = np.interp(s_nodes, profile.grid, values)
    order = np.argsort(d)
    return d[order], np.maximum.accumulate(vals[order])


def _sup_at(d_sorted, run_max, radii):
    idx = np.clip(np.searchsorted(d_sorted, radii, side="right") - 1,
                  0, len(d_sorted) - 1)
    return run_max[idx]


def _admissible_radius(d_sorted, run_max, r_lo, r_hi):
    """Largest r in [r_lo, r_hi] with sup curvature <= r^-2 (0 if none)."""
    if _sup_at(d_sorted, run_max, np.array([r_hi]))[0] <= r_hi ** -2:
        return r_hi
    if _sup_at(d_sorted, run_max, np.array([r_lo]))[0] > r_lo ** -2:
        return 0.0
    lo, hi = r_lo, r_hi
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        if _sup_at(d_sorted, run_max, np.array([mid]))[0] <= mid ** -2:
            lo = mid
        else:
            hi = mid
    return lo


def resolvable_radius(profile, center, grid=DEFAULT_GRID):
    """Smallest ball radius the off-axis distance field resolves."""
    if center <= 0.0 or center >= profile.length:
        return profile.spacing
    ds_field = profile.length / (grid.field_s_nodes - 1)
    dpsi = math.pi / (grid.field_psi_nodes - 1)
    phi_c = float(np.interp(center, profile.grid, profile.phi))
    return 2.0 * max(ds_field, phi_c * dpsi, profile.spacing)


def kappa_modulus(traj, rho, variant=RIEMANN, grid=DEFAULT_GRID):
    """inf over stamps and admissible (x, r) of V(x,r,t)/r^n.

    Admissible means r < rho and sup of the variant's curvature over the
    ball at most r^-2.  Searched on pole+meridian centers with log-spaced
    radii augmented by each center's admissibility boundary; radii below
    the field's resolvable scale are excluded (sub-cell balls cannot be
    measured).  Infinite (with zero count) when no pair is admissible.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    best = math.inf
    worst = None
    count = 0
    for i in range(len(traj)):
        profile = traj.states[i]
        cf = traj.curvature_at(i)
        t = float(traj.times[i])
        length = profile.length
        centers = np.concatenate([[0.0, length],
                                  np.linspace(0.0, length, grid.centers + 2)[1:-1]])
        r_hi = min(rho * (1.0 - 1e-9), length)
        for center in centers:
            r_lo = profile.spacing
            if r_lo >= r_hi:
                continue
            d_sorted, run_max = _sup_curv_profile(profile, cf, center,
                                                  variant, grid)
            r_adm = _admissible_radius(d_sorted, run_max, r_lo, r_hi)
            if r_adm <= r_lo:
                continue
            radii = np.geomspace(r_lo, r_hi, grid.radii)
            radii = np.unique(np.concatenate([radii[radii <= r_adm], [r_adm]]))
            ok = _sup_at(d_sorted, run_max, radii) <= radii ** -2 * (1.0 + 1e-9)
            for r, good in zip(radii, ok):
                if not good:
                    continue
                count += 1
                vol = ball_stats_state(profile, t, center, float(r), cf,
                                       grid).volume
                val = vol / r ** traj.n
                if val < best:
                    best = val
                    worst = (float(center), float(r), t, vol)
    return KappaReport(best, variant, rho, count, worst, grid)

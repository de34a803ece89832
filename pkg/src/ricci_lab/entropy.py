"""Perelman-type entropy machinery: the W functional with its side
normalization, the log-cutoff test functions for the noncollapsing
argument, the conjugate (backward) heat flow, the monotonicity comparison,
and the collapsed-ball witness search.

W(g, f, tau) = int [tau(|grad f|^2 + R) + f - n] (4 pi tau)^(-n/2) e^(-f) dvol
under (4 pi tau)^(-n/2) int e^(-f) dvol = 1.

Radial potentials on warped profiles (pole-centered) and constant
potentials on su2 homogeneous states are supported; the backward solve
evolves u = (4 pi tau)^(-n/2) e^(-f) through the linear conjugate equation
in flux (mass) form, with the zeroth-order term applied as an exact
integrating factor per substep, so positivity is unconditional and the side
normalization drifts only through the discrete mismatch between the
reaction term and the flow's measure change (reported by the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._num import trapz
from .constants import unit_ball_volume, unit_sphere_volume
from .geometry import HomogeneousState, WarpedProfile, curvature
from .analysis import ball_stats_state, _sup_curv_profile, _sup_at

SU2_FRAME_VOLUME = 16.0 * math.pi ** 2   # unit-coefficient su2 volume


def _volume_weight(state):
    """Nodal dvol weight for radial integrands."""
    if isinstance(state, WarpedProfile):
        return unit_sphere_volume(state.n - 1) * state.phi ** (state.n - 1)
    a, b, c = state.coeffs
    return SU2_FRAME_VOLUME * math.sqrt(a * b * c)


def _check_su2(state):
    if isinstance(state, HomogeneousState) and state.group != "su2":
        raise ValueError("entropy needs finite volume; nil/sol are open")


def norm_residual(state, f, tau):
    """(4 pi tau)^(-n/2) int e^(-f) dvol - 1."""
    _check_su2(state)
    pref = (4.0 * math.pi * tau) ** (-state.n / 2.0)
    if isinstance(state, WarpedProfile):
        total = trapz(_volume_weight(state) * np.exp(-np.asarray(f)),
                      state.grid)
    else:
        total = _volume_weight(state) * math.exp(-float(np.reshape(f, -1)[0]))
    return pref * total - 1.0


def normalize_side(state, f, tau):
    """Shift f so the side normalization holds exactly."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    _check_su2(state)
    f = np.asarray(f, float)
    pref = (4.0 * math.pi * tau) ** (-state.n / 2.0)
    if isinstance(state, WarpedProfile):
        total = trapz(_volume_weight(state) * np.exp(-f), state.grid)
    else:
        total = _volume_weight(state) * math.exp(-float(f.reshape(-1)[0]))
    if not (np.isfinite(total) and total > 0):
        raise ValueError("e^(-f) integral is not finite and positive")
    return f + math.log(pref * total)


def _radial_gradient_sq(state, f):
    h = state.spacing
    fe = np.concatenate([f[2:0:-1], f, f[-2:-4:-1]])   # even extension
    df = (fe[3:-1] - fe[1:-3]) / (2.0 * h)
    return df * df


def w_entropy(state, f, tau, curv=None):
    """The entropy value; call normalize_side first (checked to 1e-8)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    _check_su2(state)
    f = np.asarray(f, float)
    resid = norm_residual(state, f, tau)
    if abs(resid) > 1e-8:
        raise ValueError(f"side normalization violated by {resid:.2e}")
    curv = curv if curv is not None else curvature(state)
    pref = (4.0 * math.pi * tau) ** (-state.n / 2.0)
    n = state.n
    if isinstance(state, WarpedProfile):
        grad2 = _radial_gradient_sq(state, f)
        integrand = (tau * (grad2 + curv.scalar) + f - n) * np.exp(-f)
        return float(pref * trapz(_volume_weight(state) * integrand,
                                  state.grid))
    f0 = float(f.reshape(-1)[0])
    return float(pref * _volume_weight(state) * math.exp(-f0)
                 * (tau * curv.scalar + f0 - n))


# -- cutoff construction ---------------------------------------------------------


def psi_delta(t, delta):
    """The printed log-cutoff profile: 1 on [0, 1/2], the linear ramp
    2(1+delta-t)/(1+2 delta) on [1/2, 1], and the constant delta beyond.

    As printed, the ramp's left limit at t = 1 is 2 delta/(1+2 delta),
    not delta, so the profile jumps there; implemented verbatim, with the
    jump recorded by tests rather than patched.
    """
    if not (0.0 < delta < 0.5):
        raise ValueError("need 0 < delta < 1/2")
    t = np.asarray(t, float)
    ramp = 2.0 * (1.0 + delta - t) / (1.0 + 2.0 * delta)
    out = np.where(t <= 0.5, 1.0, np.where(t < 1.0, ramp, delta))
    return out if out.ndim else float(out)


def build_fk(state, center, r_k, lam, delta):
    """Radial potential f = -2 log(lam * psi_delta(r/r_k)) about a pole."""
    if lam <= 0 or r_k <= 0:
        raise ValueError("need positive lam and r_k")
    if not isinstance(state, WarpedProfile):
        raise TypeError("cutoff potentials live on warped profiles")
    s = state.grid
    if center <= 0.0:
        radial = s
    elif center >= state.length:
        radial = state.length - s
    else:
        raise ValueError("pole-centered cutoffs only (radial fields)")
    return -2.0 * np.log(lam * psi_delta(radial / r_k, delta))


def witness_cutoff_parameters(n, k, r_k, manifold_volume):
    """The asymptotic assignments lam_k = (4 pi)^(n/2) k 2^(n+1) / w_n and
    delta_k solving delta^2 log delta = -r_k^n / (2 vol), taken as exact
    (the smaller root, clamped into (0, 1/2))."""
    lam = (4.0 * math.pi) ** (n / 2.0) * k * 2.0 ** (n + 1) / unit_ball_volume(n)
    target = -0.5 * r_k ** n / manifold_volume
    lo, hi = 1e-12, 0.5 - 1e-12
    f_hi = hi * hi * math.log(hi)
    if target <= f_hi:     # deeper than the branch reaches; clamp at 1/2
        return lam, hi
    # x^2 log x decreases from 0 toward the minimum beyond 1/2; bisect for
    # the root on (0, 1/2)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * mid * math.log(mid) > target:
            lo = mid
        else:
            hi = mid
    return lam, 0.5 * (lo + hi)


# -- conjugate heat flow ---------------------------------------------------------


class BackwardSolveError(RuntimeError):
    pass


def _diffuse_conservative(u, profile, dt, c_stab=0.8):
    """One conservative-flux diffusion substep of du/dsigma = Lap u."""
    n = profile.n
    h = profile.spacing
    phi = profile.phi
    w_mid = (0.5 * (phi[1:] + phi[:-1])) ** (n - 1)
    w_node = phi ** (n - 1)
    flux = w_mid * np.diff(u) / h
    du = np.zeros_like(u)
    du[1:-1] = (flux[1:] - flux[:-1]) / (h * w_node[1:-1])
    u = u + dt * du
    # poles carry zero measure; fill by the smooth even limit
    u[0] = (4.0 * u[1] - u[2]) / 3.0
    u[-1] = (4.0 * u[-2] - u[-3]) / 3.0
    return u


def conjugate_evolve(traj, f_terminal, t_k, r_k, c_stab=0.8,
                     return_trace=False):
    """Solve the backward conjugate equation from f(t_k) = f_terminal down
    to t = 0 along the trajectory, via u = (4 pi tau)^(-n/2) e^(-f) with
    tau(t) = t_k - t + r_k^2.

    Returns f at t = 0 (or, with return_trace, a list of (t, f, residual)
    rows at the covered stamps, newest first t=0 last).
    """
    if not traj.is_warped:
        return _conjugate_evolve_homogeneous(traj, f_terminal, t_k, r_k,
                                             return_trace)
    i_k = traj.stamp_index(t_k)
    t_k = float(traj.times[i_k])
    n = traj.n

    def tau_of(t):
        return t_k - t + r_k * r_k

    prof = traj.states[i_k]
    f = np.asarray(f_terminal, float)
    u = (4.0 * math.pi * tau_of(t_k)) ** (-n / 2.0) * np.exp(-f)
    trace = []

    def log_row(i, uu):
        t = float(traj.times[i])
        pref = (4.0 * math.pi * tau_of(t)) ** (-n / 2.0)
        ff = -np.log(np.clip(uu, 1e-300, None)) + math.log(pref)
        resid = norm_residual(traj.states[i], ff, tau_of(t))
        trace.append((t, ff, resid))

    log_row(i_k, u)
    for i in range(i_k, 0, -1):
        prof = traj.states[i]
        t1, t0 = float(traj.times[i]), float(traj.times[i - 1])
        scal = traj.curvature_at(i).scalar
        h = prof.spacing
        dt_cfl = c_stab * h * h / (2.0 * n)
        steps = max(1, int(math.ceil((t1 - t0) / dt_cfl)))
        dt = (t1 - t0) / steps
        for _ in range(steps):
            u = _diffuse_conservative(u, prof, dt)
            u = u * np.exp(-dt * scal)      # backward reaction -R u, exact factor
            if not np.isfinite(u).all():
                raise BackwardSolveError("backward solve blew up")
        u = traj.transport_field(u, i, i - 1)
        log_row(i - 1, u)
    t0 = float(traj.times[0])
    pref0 = (4.0 * math.pi * tau_of(t0)) ** (-n / 2.0)
    f0 = -np.log(np.clip(u, 1e-300, None)) + math.log(pref0)
    if return_trace:
        return trace[::-1]
    return f0


def _conjugate_evolve_homogeneous(traj, f_terminal, t_k, r_k, return_trace):
    """Constant-in-space potentials: df/dt = -R + n/(2 tau) backward."""
    i_k = traj.stamp_index(t_k)
    t_k = float(traj.times[i_k])
    n = traj.n
    f = float(np.reshape(f_terminal, -1)[0])
    rows = [(t_k, np.array([f]), norm_residual(traj.states[i_k],
                                               np.array([f]),
                                               r_k * r_k))]
    for i in range(i_k, 0, -1):
        t1, t0 = float(traj.times[i]), float(traj.times[i - 1])
        dt = t1 - t0
        r_mid = 0.5 * (traj.curvature_at(i).scalar
                       + traj.curvature_at(i - 1).scalar)
        tau_mid = t_k - 0.5 * (t0 + t1) + r_k * r_k
        f = f + dt * (r_mid - 0.5 * n / tau_mid)   # backward in t
        rows.append((t0, np.array([f]),
                     norm_residual(traj.states[i - 1], np.array([f]),
                                   t_k - t0 + r_k * r_k)))
    if return_trace:
        return rows[::-1]
    return np.array([f])


@dataclass(frozen=True)
class MonotonicityReport:
    w_initial: float          # W(g(0), pulled-back f, t_k + r_k^2)
    w_terminal: float         # W(g(t_k), f_k, r_k^2)
    gap: float                # max(0, w_initial - w_terminal)
    tolerance: float
    ok: bool
    residual_initial: float


def monotonicity_check(traj, f_k, t_k, r_k, tol_coeff=2.0):
    """Entropy comparison W(0) <= W(t_k) along the conjugate solve, with the
    resolution-indexed tolerance tol_coeff * h / L."""
    i_k = traj.stamp_index(t_k)
    t_k = float(traj.times[i_k])
    state_k = traj.states[i_k]
    f_k = normalize_side(state_k, f_k, r_k * r_k)
    w_term = w_entropy(state_k, f_k, r_k * r_k, traj.curvature_at(i_k))
    f0 = conjugate_evolve(traj, f_k, t_k, r_k)
    state0 = traj.states[0]
    tau0 = t_k + r_k * r_k
    resid = norm_residual(state0, f0, tau0)
    f0n = normalize_side(state0, f0, tau0)
    w_init = w_entropy(state0, f0n, tau0, traj.curvature_at(0))
    if traj.is_warped:
        tol = tol_coeff * state0.spacing / state0.length
    else:
        tol = tol_coeff * float(traj.times[1] - traj.times[0])
    gap = max(0.0, w_init - w_term)
    return MonotonicityReport(w_init, w_term, gap, tol, gap <= tol,
                              float(resid))


# -- collapsed-ball witness search ----------------------------------------------


@dataclass(frozen=True)
class Witness:
    center: float
    radius: float
    time: float
    volume: float
    volume_bound: float       # (1/2k) w_n r^n
    halving_level: int


@dataclass(frozen=True)
class WitnessReport:
    found: bool
    witness: Witness | None
    k: int
    searched: int


def witness_search(traj, rho, k=1, grid=None, fraction=None):
    """Look for (x, r, t) with V <= fraction * w_n r^n (fraction = 1/(2k)
    by default) and sup R <= r^-2 on the ball, then shrink r by halving to
    the smallest scale still collapsed (so V(x, r/2) exceeds the bound at
    r/2).  Exhaustive-failure reports are the expected outcome on
    noncollapsed flows; in this reduced class the sphere fibers force
    large positive scalar curvature exactly where volume collapses, so
    curvature-admissible witnesses at the 1/2 fraction do not arise at all
    (the fraction knob lets tests exercise the halving machinery)."""
    from .analysis import DEFAULT_GRID
    grid = grid or DEFAULT_GRID
    if k < 1:
        raise ValueError("need k >= 1")
    w_n = unit_ball_volume(traj.n)
    frac = fraction if fraction is not None else 1.0 / (2.0 * k)
    bound = lambda r: w_n * r ** traj.n * frac
    searched = 0
    for i in range(len(traj)):
        prof = traj.states[i]
        cf = traj.curvature_at(i)
        t = float(traj.times[i])
        centers = np.concatenate([[0.0, prof.length],
                                  np.linspace(0.0, prof.length,
                                              grid.centers + 2)[1:-1]])
        r_hi = min(rho * (1 - 1e-9), prof.length)
        for center in centers:
            d_sorted, run_max = _sup_curv_profile(prof, cf, center, "scalar",
                                                  grid)
            radii = np.geomspace(max(prof.spacing, 1e-3 * prof.length),
                                 r_hi, grid.radii)
            for r in radii:
                searched += 1
                if _sup_at(d_sorted, run_max, np.array([r]))[0] > r ** -2:
                    continue
                vol = ball_stats_state(prof, t, center, float(r), cf,
                                       grid).volume
                if vol > bound(r):
                    continue
                # halving step: largest j with the collapse persisting
                level = 0
                r_fin, v_fin = float(r), vol
                while True:
                    r_next = r_fin / 2.0
                    v_next = ball_stats_state(prof, t, center, r_next, cf,
                                              grid).volume
                    if v_next <= bound(r_next):
                        level += 1
                        r_fin, v_fin = r_next, v_next
                        if r_fin < prof.spacing:
                            break
                    else:
                        break
                return WitnessReport(True, Witness(float(center), r_fin, t,
                                                   v_fin, bound(r_fin),
                                                   level), k, searched)
    return WitnessReport(False, None, k, searched)

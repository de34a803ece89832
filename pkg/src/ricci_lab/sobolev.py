"""Sobolev-constant machinery: the L^1 -> L^2 conversion inequality,
injectivity-radius and isoperimetric upper bounds, and a Rayleigh-quotient
lower estimator.

The two constants in play on a domain O are the best constants in

    ||f||_{n/(n-1)}  <= C_S    ||grad f||_1
    ||f||_{2n/(n-2)} <= C_S2   ||grad f||_2

for f compactly supported in the interior of O.  Both are dimensionless
(critical exponents), so metric scaling g -> c g leaves them unchanged;
tests pin that down.  Lower estimates come from explicit radial trial
functions (tents plus truncated inverse-power bumps, which contain the
extremal profile shape in the Euclidean limit); upper estimates come from
the curvature-pinched isoperimetric constant (valid below half the
injectivity-radius bound) and from the Ricci-lower-bound volume-ratio
estimate with its registry front constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._num import trapz
from .analysis import ball_volume, boundary_distance, diam, model_volume
from .constants import ConstantRegistry, unit_sphere_volume
from .geometry import WarpedProfile, curvature_warped


def cs2_from_cs(c_s, n):
    """The L^2 constant from the L^1 constant: factor 2(n-1)/(n-2)."""
    if n < 3:
        raise ValueError("conversion needs n >= 3")
    if c_s < 0:
        raise ValueError("Sobolev constant must be nonnegative")
    return 2.0 * (n - 1) / (n - 2) * c_s


def croke_upper(n, convention="sphere"):
    """Curvature-free isoperimetric upper bound for C_S on small balls,
    w^((n-1)/n) / (2^((n-1)/n) w'), valid for radii up to half the
    injectivity-radius bound of injectivity_lower.

    Both unit-volume conventions are implemented; "sphere" (the volume of
    S^n in R^(n+1)) is the registry default, "ball" kept for comparison.
    """
    if n < 2:
        raise ValueError("needs n >= 2")
    if convention == "sphere":
        wn = unit_sphere_volume(n)
        wm = unit_sphere_volume(n - 1)
    elif convention == "ball":
        from .constants import unit_ball_volume
        wn = unit_ball_volume(n)
        wm = unit_ball_volume(n - 1)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return wn ** ((n - 1) / n) / (2.0 ** ((n - 1) / n) * wm)


@dataclass(frozen=True)
class InjectivityBound:
    r1: float
    r2: float
    variant: str


def injectivity_lower(kappa1, kappa2, r0, vol_ball, n=3, variant="strict"):
    """Injectivity-radius lower bound r2 on B(p, r1) from sectional pinching
    kappa1 <= K <= kappa2 on B(p, r0).

    r1 = min(r0, pi/(4 sqrt(kappa2)))/4 for the strict reading (default) or
    pi/sqrt(kappa2) for the loose one (the source states both; the stricter
    is smaller hence safe).  vol_ball is vol(B(p, r1)), either a number or
    a callable radius -> volume.
    """
    if kappa1 > kappa2:
        raise ValueError("need kappa1 <= kappa2")
    if r0 <= 0:
        raise ValueError("need r0 > 0")
    if variant not in ("strict", "loose"):
        raise ValueError(f"unknown variant {variant!r}")
    if kappa2 > 0:
        cap = math.pi / math.sqrt(kappa2)
        if variant == "strict":
            cap /= 4.0
        r1 = 0.25 * min(r0, cap)
    else:
        r1 = 0.25 * r0
    vol = vol_ball(r1) if callable(vol_ball) else float(vol_ball)
    if vol <= 0:
        return InjectivityBound(r1, 0.0, variant)
    v2 = model_volume(kappa1, 2.0 * r1, n)
    v1 = model_volume(kappa1, r1, n)
    r2 = 0.5 * r1 / (1.0 + v2 * v2 / (vol * v1))
    return InjectivityBound(r1, r2, variant)


def anderson_upper(n, kappa, r, vol_ball, registry=None):
    """Volume-ratio upper bound C(n,kappa) (V_{-kappa}(r)/vol)^(1/n) for C_S
    under Ric >= -kappa(n-1); front constant from the registry
    (proof-implicit, user-pluggable)."""
    if kappa < 0:
        raise ValueError("kappa is the magnitude of the Ricci lower bound")
    if vol_ball <= 0:
        raise ValueError("ball volume must be positive")
    registry = registry or ConstantRegistry(n)
    front = registry["anderson_c"]
    return front * (model_volume(-kappa, r, n) / vol_ball) ** (1.0 / n)


# -- Rayleigh-quotient lower estimator ------------------------------------------


def _trial_families(radius, n, size):
    """Radial trial profiles on [0, radius]: tents (1 - rho/R)^p and
    truncated inverse-power bumps (1 + (rho/a)^2)^(-(n-2)/2)."""
    k_tent = size // 2
    k_bump = size - k_tent
    fams = []
    for p in np.geomspace(0.6, 4.0, k_tent):
        fams.append(("tent", float(p)))
    for a in np.geomspace(0.04 * radius, 0.8 * radius, k_bump):
        fams.append(("bump", float(a)))
    return fams


def _trial_values(kind, param, rho, radius, n):
    if kind == "tent":
        base = np.maximum(1.0 - rho / radius, 0.0)
        f = base ** param
        with np.errstate(divide="ignore"):
            df = -param / radius * base ** (param - 1.0)
        if param < 1.0:
            df[-1] = 0.0  # integrable endpoint singularity, zero measure
        return f, df
    pw = -(n - 2) / 2.0
    base = (1.0 + (rho / param) ** 2) ** pw
    floor = (1.0 + (radius / param) ** 2) ** pw
    f = np.maximum(base - floor, 0.0)
    df = 2.0 * pw * rho / param ** 2 * (1.0 + (rho / param) ** 2) ** (pw - 1.0)
    df = np.where(base > floor, df, 0.0)
    return f, df


@dataclass(frozen=True)
class SobolevReport:
    center: float
    radius: float
    n: int
    cs2_lower: float
    cs2_upper: float
    cs_upper_croke: float | None
    cs_upper_anderson: float | None
    method: str
    injectivity: InjectivityBound | None = None

    @property
    def bracket(self):
        return self.cs2_lower, self.cs2_upper


def rayleigh_lower(state, center, radius, family_size=32, quad_nodes=2048):
    """Certified lower estimate of C_S2 on the pole-centered ball: the
    maximum Rayleigh ratio ||f||_{2n/(n-2)} / ||grad f||_2 over the radial
    trial family."""
    if family_size < 1:
        raise ValueError("need a nonempty trial family")
    n = state.n
    length = state.length
    if center > 0.5 * length:
        prof_s = length - state.grid[::-1]
        phi = state.phi[::-1]
        dist_from = length - center
    else:
        prof_s = state.grid
        phi = state.phi
        dist_from = center
    if dist_from > 1e-9 * length:
        raise ValueError("rayleigh_lower supports pole-centered balls")
    radius = min(radius, length)
    rho = np.linspace(0.0, radius, quad_nodes)
    area = unit_sphere_volume(n - 1) * np.interp(rho, prof_s, phi) ** (n - 1)
    q_exp = 2.0 * n / (n - 2)
    best = 0.0
    best_tag = None
    for kind, param in _trial_families(radius, n, family_size):
        f, df = _trial_values(kind, param, rho, radius, n)
        num = trapz(np.abs(f) ** q_exp * area, rho) ** (1.0 / q_exp)
        den = math.sqrt(trapz(df * df * area, rho))
        if den > 0 and num / den > best:
            best = num / den
            best_tag = (kind, param)
    return best, best_tag


def sobolev_upper(state, center, radius, registry=None, grid=None):
    """Smallest applicable C_S2 upper bound on B(center, radius) plus the
    ingredients; works for any ball center."""
    from .analysis import DEFAULT_GRID
    grid = grid or DEFAULT_GRID
    registry = registry or ConstantRegistry(state.n)
    n = state.n
    cf = curvature_warped(state)
    r0 = min(diam(state), boundary_distance(state, center))
    kap1 = float(min(cf.k_rad.min(), cf.k_orb.min()))
    kap2 = float(max(cf.k_rad.max(), cf.k_orb.max()))
    inj = injectivity_lower(kap1, kap2, r0,
                            lambda r: ball_volume(state, center, r, grid), n)
    cs_croke = None
    if radius <= 0.5 * inj.r2:
        cs_croke = croke_upper(n)
    ric_min = float(min(cf.ric_rad.min(), cf.ric_orb.min()))
    kappa_ric = max(0.0, -ric_min / (n - 1))
    cs_anderson = None
    if radius <= min(r0 / 4.0, 1.0):
        vol = ball_volume(state, center, radius, grid)
        cs_anderson = anderson_upper(n, kappa_ric, radius, vol, registry)
    uppers = [cs2_from_cs(c, n) for c in (cs_croke, cs_anderson)
              if c is not None]
    cs2_upper = min(uppers) if uppers else math.inf
    method = "croke-upper" if (cs_croke is not None and
                               cs2_from_cs(cs_croke, n) <= cs2_upper) \
        else ("anderson-upper" if uppers else "none")
    return cs2_upper, cs_croke, cs_anderson, method, inj


def sobolev_bracket(state, center, radius, registry=None, grid=None):
    """SobolevReport with the Rayleigh lower estimate (pole-centered balls)
    and the smallest applicable upper bound."""
    cs2_upper, cs_croke, cs_anderson, method, inj = sobolev_upper(
        state, center, radius, registry, grid)
    lower, _ = rayleigh_lower(state, center, radius)
    return SobolevReport(float(center), float(radius), state.n, lower,
                         cs2_upper, cs_croke, cs_anderson, method, inj)

"""Symmetry-reduced metrics and their curvature data.

Warped representation: g = dr^2 + phi(r)^2 g_{S^(n-1)} with r arclength on
[0, L].  Sphere topology closes with phi = 0 and slope +-1 at both ends,
disk keeps only the left pole, band has no poles.  Pointwise curvature:

    K_rad   = -phi''/phi              (planes containing the radial direction)
    K_orb   = (1 - phi'^2)/phi^2      (planes tangent to the orbit sphere)
    Ric_rad = (n-1) K_rad
    Ric_orb = K_rad + (n-2) K_orb
    R       = 2(n-1) K_rad + (n-1)(n-2) K_orb
    |Rm|^2  = 4(n-1) K_rad^2 + 2(n-1)(n-2) K_orb^2

The tensor-norm convention is the full four-index contraction, so constant
curvature K gives |Rm|^2 = 2n(n-1) K^2.

Derivatives use fourth-order central stencils with ghost nodes obtained by
odd reflection through the poles (smooth closure makes the profile an odd
function there).  The quotient (1 - phi'^2)/phi^2 is a 0/0 limit at a pole
and loses uniform accuracy on plain stencils, so the two nodes adjacent to
each pole are evaluated on a local odd-quintic interpolant
phi = a1 rho + a3 rho^3 + a5 rho^5 through the three nearest samples; pole
values use the smooth limit K_rad = K_orb = -6 a3 / a1.  The resulting
sup-norm error is second order with a small constant (dominated by the
third node off each pole), which the convergence tests pin down.

Homogeneous representation: left-invariant metric diag(A, B, C) on a
3-dimensional unimodular group in a fixed Milnor frame with structure
signature (c1, c2, c3).  With the orthonormal-frame constants
lam_i = c_i sqrt(A_i / (A_j A_k)) and mu_i = (lam_1+lam_2+lam_3)/2 - lam_i,

    K(e_i ^ e_j) = lam_k mu_k - mu_i mu_j,   Ric(e_i) = 2 mu_j mu_k,

and the curvature operator is diagonal on the coordinate 2-planes, so
|Rm|^2 = 4 (K_12^2 + K_23^2 + K_31^2).  The signature convention is fixed
so that su2 with A = B = C = 1 is the round metric of sectional curvature
1/4 (tests pin this against a brute-force frame computation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class InvalidGeometryError(ValueError):
    """Raised when a state fails its geometric invariants."""


SPHERE = "sphere"
DISK = "disk"
BAND = "band"

# |phi'(pole) -+ 1| <= POLE_SLOPE_TOL * h at construction time
POLE_SLOPE_TOL = 1.0

MILNOR_SIGNATURES = {
    "su2": (1.0, 1.0, 1.0),
    "nil": (1.0, 0.0, 0.0),
    "sol": (1.0, -1.0, 0.0),
}


def _readonly(a):
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WarpedProfile:
    """One time slice of a rotationally symmetric metric.

    grid must be uniform (non-uniform grids are rejected so the stencil
    orders stay predictable), strictly increasing, with at least 16 cells.
    """

    n: int
    grid: np.ndarray
    phi: np.ndarray
    topology: str = SPHERE

    def __post_init__(self):
        if self.n < 3:
            raise InvalidGeometryError(f"dimension must be >= 3, got {self.n}")
        if self.topology not in (SPHERE, DISK, BAND):
            raise InvalidGeometryError(f"unknown topology {self.topology!r}")
        grid = np.asarray(self.grid, float)
        phi = np.asarray(self.phi, float)
        if grid.ndim != 1 or grid.shape != phi.shape:
            raise InvalidGeometryError("grid and phi must be 1-d arrays of equal length")
        if len(grid) < 17:
            raise InvalidGeometryError("need at least 16 cells")
        steps = np.diff(grid)
        if np.any(steps <= 0):
            raise InvalidGeometryError("grid must be strictly increasing")
        h = steps.mean()
        if np.max(np.abs(steps - h)) > 1e-9 * h:
            raise InvalidGeometryError("grid must be uniform")
        if not (np.isfinite(phi).all() and np.isfinite(grid).all()):
            raise InvalidGeometryError("non-finite samples")
        if grid[0] != 0.0:
            grid = grid - grid[0]
        self._check_topology(grid, phi, h)
        object.__setattr__(self, "grid", _readonly(grid))
        object.__setattr__(self, "phi", _readonly(phi))

    def _check_topology(self, grid, phi, h):
        left_pole = self.topology in (SPHERE, DISK)
        right_pole = self.topology == SPHERE
        interior = phi[1:-1] if (left_pole or right_pole) else phi
        lo = 1 if left_pole else 0
        hi = len(phi) - 1 if right_pole else len(phi)
        if np.any(phi[lo:hi] <= 0):
            raise InvalidGeometryError("phi must be positive away from poles")
        # slope residue of a smooth closure is ~ K h^2/6 with K the pole
        # curvature (~ (pi/L)^2 for sphere-like profiles), so the dominant
        # floor at high curvature is (pi h / L)^2
        length = grid[-1] - grid[0]
        tol = POLE_SLOPE_TOL * max(h, 4.0 * (math.pi * h / length) ** 2)
        if left_pole:
            if phi[0] != 0.0:
                raise InvalidGeometryError("phi must vanish at the left pole")
            if abs(phi[1] / h - 1.0) > tol:
                raise InvalidGeometryError(
                    f"left pole slope {phi[1] / h:.6f} not within {tol:.2e} of 1")
        if right_pole:
            if phi[-1] != 0.0:
                raise InvalidGeometryError("phi must vanish at the right pole")
            if abs(phi[-2] / h - 1.0) > tol:
                raise InvalidGeometryError(
                    f"right pole slope {phi[-2] / h:.6f} not within {tol:.2e} of -1 (abs)")
        del interior

    # -- basic descriptors --------------------------------------------------

    @property
    def m(self):
        return len(self.grid) - 1

    @property
    def length(self):
        return float(self.grid[-1])

    @property
    def spacing(self):
        return float(self.grid[-1] / (len(self.grid) - 1))

    def scaled_metric(self, c):
        """The profile of the metric c*g: lengths scale by sqrt(c)."""
        if c <= 0:
            raise InvalidGeometryError("metric scale factor must be positive")
        s = math.sqrt(c)
        return WarpedProfile(self.n, s * self.grid, s * self.phi, self.topology)

    def with_phi(self, phi):
        return WarpedProfile(self.n, self.grid, phi, self.topology)

    # -- serialization ------------------------------------------------------

    def to_json(self):
        return json.dumps({
            "n": self.n,
            "L": self.length,
            "m": self.m,
            "topology": self.topology,
            "phi": self.phi.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        grid = np.linspace(0.0, rec["L"], rec["m"] + 1)
        return cls(rec["n"], grid, np.asarray(rec["phi"], float), rec["topology"])


@dataclass(frozen=True)
class HomogeneousState:
    """Left-invariant diagonal 3-metric in a Milnor frame."""

    group: str
    coeffs: tuple

    def __post_init__(self):
        if self.group not in MILNOR_SIGNATURES:
            raise InvalidGeometryError(f"unknown group tag {self.group!r}")
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != 3 or any(c <= 0 for c in coeffs):
            raise InvalidGeometryError("metric coefficients must be three positive reals")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n(self):
        return 3

    def scaled_metric(self, c):
        if c <= 0:
            raise InvalidGeometryError("metric scale factor must be positive")
        return HomogeneousState(self.group, tuple(c * a for a in self.coeffs))


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Pointwise curvature of a warped profile on its grid."""

    n: int
    grid: np.ndarray
    k_rad: np.ndarray
    k_orb: np.ndarray
    ric_rad: np.ndarray
    ric_orb: np.ndarray
    scalar: np.ndarray
    rm_norm: np.ndarray

    @property
    def rm_max(self):
        return float(np.max(self.rm_norm))

    def ric_min(self):
        return float(min(self.ric_rad.min(), self.ric_orb.min()))


@dataclass(frozen=True)
class HomogeneousCurvature:
    """Curvature of a homogeneous state: constants over the manifold."""

    n: int
    sectional: tuple   # (K_23, K_31, K_12)
    ricci: tuple       # Ricci eigenvalues relative to the orthonormal frame
    scalar: float
    rm_norm: float

    @property
    def rm_max(self):
        return self.rm_norm

    def ric_min(self):
        return min(self.ricci)


# -- warped curvature ---------------------------------------------------------


def _ghost_extend(phi, topology):
    """Append two ghost samples on each side (odd reflection at poles,
    quintic extrapolation at open ends)."""
    def extrapolate(tail):
        # next value of the degree-5 interpolant through the last 6 samples
        c = np.array([-1.0, 6.0, -15.0, 20.0, -15.0, 6.0])
        vals = list(tail)
        for _ in range(2):
            vals.append(float(c @ vals[-6:]))
        return vals[-2:]

    if topology == SPHERE:
        left = [-phi[2], -phi[1]]
        right = [-phi[-2], -phi[-3]]
    elif topology == DISK:
        left = [-phi[2], -phi[1]]
        right = extrapolate(phi[-6:])
    else:
        down = extrapolate(phi[5::-1])   # [ghost(-h), ghost(-2h)]
        left = [down[1], down[0]]
        right = extrapolate(phi[-6:])
    return np.concatenate([left, phi, right])


def _derivatives(phi, h, topology):
    """Fourth-order first and second derivatives on the full grid."""
    ext = _ghost_extend(phi, topology)
    d1 = (ext[:-4] - 8.0 * ext[1:-3] + 8.0 * ext[3:-1] - ext[4:]) / (12.0 * h)
    d2 = (-ext[:-4] + 16.0 * ext[1:-3] - 30.0 * ext[2:-2]
          + 16.0 * ext[3:-1] - ext[4:]) / (12.0 * h * h)
    return d1, d2


def _pole_series(phi_near, h):
    """Coefficients (a1, a3, a5) of the odd quintic through the three
    samples nearest a pole (distances h, 2h, 3h)."""
    rho = h * np.array([1.0, 2.0, 3.0])
    mat = np.stack([rho, rho ** 3, rho ** 5], axis=1)
    return np.linalg.solve(mat, np.asarray(phi_near, float))


def _series_curvature(a, rho):
    a1, a3, a5 = a
    val = a1 * rho + a3 * rho ** 3 + a5 * rho ** 5
    slope = a1 + 3.0 * a3 * rho ** 2 + 5.0 * a5 * rho ** 4
    bend = 6.0 * a3 * rho + 20.0 * a5 * rho ** 3
    k_rad = -bend / val
    k_orb = (1.0 - slope ** 2) / val ** 2
    return k_rad, k_orb


def curvature_warped(p: WarpedProfile) -> CurvatureField:
    """Curvature field of a warped profile; pole values filled by the
    smooth-closure limits."""
    phi = np.asarray(p.phi, float)
    h = p.spacing
    n = p.n
    left_pole = p.topology in (SPHERE, DISK)
    right_pole = p.topology == SPHERE
    lo = 1 if left_pole else 0
    hi = len(phi) - 1 if right_pole else len(phi)
    if np.any(phi[lo:hi] <= 0):
        raise InvalidGeometryError("phi must be positive away from poles")

    d1, d2 = _derivatives(phi, h, p.topology)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rad = -d2 / phi
        k_orb = (1.0 - d1 ** 2) / phi ** 2

    if left_pole:
        a = _pole_series(phi[1:4], h)
        k_rad[1], k_orb[1] = _series_curvature(a, h)
        k_rad[2], k_orb[2] = _series_curvature(a, 2.0 * h)
        k_rad[0] = k_orb[0] = -6.0 * a[1] / a[0]
    if right_pole:
        a = _pole_series(phi[-2:-5:-1], h)
        k_rad[-2], k_orb[-2] = _series_curvature(a, h)
        k_rad[-3], k_orb[-3] = _series_curvature(a, 2.0 * h)
        k_rad[-1] = k_orb[-1] = -6.0 * a[1] / a[0]

    if not (np.isfinite(k_rad).all() and np.isfinite(k_orb).all()):
        raise InvalidGeometryError("curvature is not finite")

    ric_rad = (n - 1) * k_rad
    ric_orb = k_rad + (n - 2) * k_orb
    scalar = 2.0 * (n - 1) * k_rad + (n - 1) * (n - 2) * k_orb
    rm2 = 4.0 * (n - 1) * k_rad ** 2 + 2.0 * (n - 1) * (n - 2) * k_orb ** 2
    return CurvatureField(n, p.grid, _readonly(k_rad), _readonly(k_orb),
                          _readonly(ric_rad), _readonly(ric_orb),
                          _readonly(scalar), _readonly(np.sqrt(rm2)))


# -- homogeneous curvature ----------------------------------------------------


def curvature_homogeneous(s: HomogeneousState) -> HomogeneousCurvature:
    """Milnor-frame curvature of a left-invariant diagonal 3-metric."""
    c = MILNOR_SIGNATURES[s.group]
    a = s.coeffs
    lam = np.array([
        c[0] * math.sqrt(a[0] / (a[1] * a[2])),
        c[1] * math.sqrt(a[1] / (a[2] * a[0])),
        c[2] * math.sqrt(a[2] / (a[0] * a[1])),
    ])
    mu = 0.5 * lam.sum() - lam
    # sectional curvatures of the coordinate planes
    k23 = lam[0] * mu[0] - mu[1] * mu[2]
    k31 = lam[1] * mu[1] - mu[2] * mu[0]
    k12 = lam[2] * mu[2] - mu[0] * mu[1]
    ricci = (2.0 * mu[1] * mu[2], 2.0 * mu[2] * mu[0], 2.0 * mu[0] * mu[1])
    scalar = sum(ricci)
    rm2 = 4.0 * (k12 ** 2 + k23 ** 2 + k31 ** 2)
    return HomogeneousCurvature(3, (float(k23), float(k31), float(k12)),
                                tuple(float(r) for r in ricci),
                                float(scalar), float(math.sqrt(rm2)))


def curvature(state):
    """Dispatch on the reduced representation."""
    if isinstance(state, WarpedProfile):
        return curvature_warped(state)
    if isinstance(state, HomogeneousState):
        return curvature_homogeneous(state)
    raise TypeError(f"not a reduced metric state: {type(state)!r}")


# -- standard profiles --------------------------------------------------------


def round_sphere(n=3, radius=1.0, m=256):
    """Round S^n of the given radius as a warped profile."""
    grid = np.linspace(0.0, math.pi * radius, m + 1)
    phi = radius * np.sin(grid / radius)
    phi[0] = phi[-1] = 0.0
    return WarpedProfile(n, grid, phi, SPHERE)


def flat_disk(n=3, length=1.0, m=256):
    """Flat radial patch phi = r on [0, length]."""
    grid = np.linspace(0.0, length, m + 1)
    return WarpedProfile(n, grid, grid.copy(), DISK)


def hyperbolic_disk(n=3, scale=1.0, length=1.0, m=256):
    """Constant curvature -1/scale^2 patch phi = scale*sinh(r/scale)."""
    grid = np.linspace(0.0, length, m + 1)
    return WarpedProfile(n, grid, scale * np.sinh(grid / scale), DISK)


def perturbed_sphere(n=3, radius=1.0, m=256, amplitudes=(), seed=None, amplitude=None):
    """Sphere profile modulated by even bumps that keep both poles smooth:

        phi = radius * sin(x) * (1 + sum_j a_j sin(jx)^2),   x = r/radius.

    The modulation factors are even about both poles, so phi stays an odd
    function there and the closure slopes remain exactly +-1.  Pass either
    explicit amplitudes or (seed, amplitude) for a random draw.
    """
    if seed is not None:
        rng = np.random.default_rng(seed)
        k = rng.integers(2, 5)
        amps = rng.uniform(-1.0, 1.0, size=int(k))
        amps *= (amplitude if amplitude is not None else 0.05) / max(1.0, np.abs(amps).sum())
        amplitudes = amps
    amplitudes = np.asarray(list(amplitudes), float)
    if amplitudes.size and np.abs(amplitudes).sum() >= 0.95:
        raise InvalidGeometryError("modulation too strong, profile may touch zero")
    grid = np.linspace(0.0, math.pi * radius, m + 1)
    x = grid / radius
    mod = np.ones_like(x)
    for j, a in enumerate(amplitudes, start=1):
        mod += a * np.sin((j + 1) * x) ** 2
    phi = radius * np.sin(x) * mod
    phi[0] = phi[-1] = 0.0
    return WarpedProfile(n, grid, phi, SPHERE)

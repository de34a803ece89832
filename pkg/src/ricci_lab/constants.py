"""Registry of named constants used by the estimate checkers.

Every entry carries a provenance label so reports can distinguish values
fixed by printed formulas from proof-implicit placeholders that a user may
want to tighten.  The registry is built per dimension n (and a
noncollapsedness level kappa for the kappa-dependent entries), cross-checks
its own closed forms, and accepts overrides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._num import trapz

PAPER = "paper-explicit"
IMPLICIT = "proof-implicit"
DERIVED = "derived-convention"
USER = "user"


@dataclass(frozen=True)
class Constant:
    name: str
    value: float
    provenance: str
    note: str = ""


def unit_ball_volume(n):
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def unit_sphere_volume(k):
    """Volume of the unit k-sphere S^k sitting in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def sigma_series_value(n):
    """Closed form n(n+2)/2 of the geometric-type sum 2k/(1+2/n)^k."""
    return n * (n + 2) / 2.0


def _hyperbolic_unit_ball_volume(n, samples=4097):
    u = np.linspace(0.0, 1.0, samples)
    return unit_sphere_volume(n - 1) * trapz(np.sinh(u) ** (n - 1), u)


class ConstantRegistry:
    """Named constants with provenance, keyed by short strings.

    Keys
    ----
    alpha_n, eps0, eps1, lambda_n, sigma_n : explicit constants of the
        curvature estimates.
    c_curvature : growth constant in d|Rm|/dt <= Lap|Rm| + c|Rm|^2.
    anderson_c : front constant of the Ricci-lower-bound Sobolev estimate.
    kappa_conversion : factor converting scalar-variant noncollapsedness
        into the riemann variant under this package's |Rm| convention.
    omega_ball / omega_sphere : the two unit-volume conventions in play;
        croke_const (sphere reading, the default) and croke_const_ball
        (alternate reading) are both kept.
    bishop_c : volume-comparison constant sup_{0<r<R<=1} V_{-1}(R) r^n / V_{-1}(r).
    alpha_bar, alpha_star, rho_nk, c2, c5, c6, c7 : proof-implicit
        placeholders feeding the default delta0/C0 values.
    delta0_A/B/C, c0_A/B/C : per-theorem smallness thresholds and
        conclusion constants.  delta0 defaults follow the proof chains with
        the placeholder inputs; checkers accept user values.
    """

    def __init__(self, n, kappa=1.0, overrides=None):
        if n < 3:
            raise ValueError(f"dimension must be >= 3, got {n}")
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.n = int(n)
        self.kappa = float(kappa)
        self._entries: dict[str, Constant] = {}
        self._build()
        for key, value in (overrides or {}).items():
            self.override(key, value)

    # -- construction -----------------------------------------------------

    def _put(self, name, value, provenance, note=""):
        self._entries[name] = Constant(name, float(value), provenance, note)

    def _build(self):
        n = self.n
        alpha = 1.0 / (40.0 * (n - 1))
        eps0 = 1.0 / 42.0
        eps1 = eps0 / math.sqrt(1.0 + 2.0 * alpha * eps0 ** 2)
        self._put("alpha_n", alpha, PAPER, "1/(40(n-1))")
        self._put("eps0", eps0, PAPER, "1/42")
        self._put("eps1", eps1, PAPER, "eps0/sqrt(1+2 alpha_n eps0^2)")
        self._put("lambda_n", 2.0 * alpha + eps0 ** -2, PAPER, "2 alpha_n + eps0^-2")
        self._put("sigma_n", sigma_series_value(n), PAPER, "sum 2k/(1+2/n)^k = n(n+2)/2")

        self._put("c_curvature", 8.0, IMPLICIT,
                  "constant in d|Rm|/dt <= Lap|Rm| + c|Rm|^2; empirical values "
                  "reported by the subsolution check")
        self._put("anderson_c", 100.0, IMPLICIT, "user-pluggable front constant")
        self._put("kappa_conversion", (2.0 * n * (n - 1)) ** (-n / 4.0), DERIVED,
                  "(2n(n-1))^(-n/4) under the |Rm|^2 = 2n(n-1)K^2 convention")

        omega_ball = unit_ball_volume(n)
        omega_sphere = unit_sphere_volume(n)
        self._put("omega_ball", omega_ball, DERIVED, "unit ball volume in R^n")
        self._put("omega_sphere", omega_sphere, DERIVED, "unit n-sphere volume in R^(n+1)")
        croke_sphere = omega_sphere ** ((n - 1) / n) / (
            2.0 ** ((n - 1) / n) * unit_sphere_volume(n - 1))
        croke_ball = omega_ball ** ((n - 1) / n) / (
            2.0 ** ((n - 1) / n) * unit_ball_volume(n - 1))
        self._put("croke_const", croke_sphere, DERIVED,
                  "sphere-volume reading (registry default)")
        self._put("croke_const_ball", croke_ball, DERIVED,
                  "alternate unit-ball-volume reading, kept for comparison")

        self._put("bishop_c", _hyperbolic_unit_ball_volume(n) / omega_ball, DERIVED,
                  "V_{-1}(1)/omega_ball bounds V_{-1}(R)/V_{-1}(r) * r^n on (0,1]")

        alpha_bar = 0.5 * alpha
        rho_nk = 1.0 / 16.0
        c2 = 10.0
        self._put("alpha_bar", alpha_bar, IMPLICIT, "backward time window, <= alpha_n/2")
        self._put("alpha_star", 0.5 * alpha, IMPLICIT, "distance-retention window")
        self._put("rho_nk", rho_nk, IMPLICIT, "Sobolev ball radius, <= 1/16")
        self._put("c2", c2, IMPLICIT, "evolved Sobolev constant placeholder")
        for key in ("c5", "c6", "c7"):
            self._put(key, 10.0, IMPLICIT, "placeholder")

        c_curv = 8.0
        c3 = (2.0 * c_curv * n + 4.0 * n * (n - 1)
              + 0.5 * n * (1 + 0.5 * n) ** 2 / alpha_bar
              + (n + 2) ** 2 * math.exp(8.0 * (n - 1) * alpha_bar) / (4.0 * rho_nk ** 2)
              ) ** ((n + 2) / n)
        self._put("c3", c3, IMPLICIT, "assembled from c_curvature, alpha_bar, rho_nk")

        mu_pow = (1.0 + 2.0 / n) ** (-sigma_series_value(n))
        delta0_a = 2.0 ** (-n / 2.0) * mu_pow * c2 ** (-n) * c3 ** (-n / 2.0) / alpha_bar
        self._put("delta0_A", delta0_a, IMPLICIT,
                  "default smallness threshold assembled from placeholders")
        c5 = c6 = 10.0
        delta0_b = (2.0 ** (-n / 2.0) * 13.0 ** (-n) * mu_pow * c5 ** (-n)
                    * c6 ** (-n / 2.0) / alpha_bar
                    * math.exp(-8.0 * (n - 1) * alpha_bar))
        self._put("delta0_B", delta0_b, IMPLICIT, "default smallness threshold")
        bishop = self._entries["bishop_c"].value
        self._put("delta0_C", delta0_b * 4.0 ** (-n) * bishop ** (-2), IMPLICIT,
                  "theorem-B default scaled by the volume-comparison factor")
        # As t -> 0 on a near-flat region, the averaged-window conclusion
        # tends to C0 * w_n^(2/n) eps1^2 / 4 times the pointwise curvature,
        # so any admissible C0 must clear 4 w_n^(-2/n) / eps1^2.
        c0_floor = 4.0 * omega_ball ** (-2.0 / n) / eps1 ** 2
        for key in ("c0_A", "c0_B", "c0_C"):
            self._put(key, 10.0 * c0_floor, IMPLICIT,
                      "conservative conclusion constant, 10x the flat-limit "
                      "floor of the averaged-window bound")

    # -- access ------------------------------------------------------------

    def __getitem__(self, name):
        return self._entries[name].value

    def get(self, name, default=None):
        entry = self._entries.get(name)
        return default if entry is None else entry.value

    def entry(self, name):
        return self._entries[name]

    def override(self, name, value):
        if name not in self._entries:
            raise KeyError(f"unknown constant {name!r}")
        old = self._entries[name]
        self._entries[name] = Constant(name, float(value), USER, old.note)

    def as_dict(self):
        return {k: {"value": c.value, "provenance": c.provenance, "note": c.note}
                for k, c in self._entries.items()}

    def self_check(self, tol=1e-15):
        """Cross-check the closed forms against independent arithmetic."""
        n = self.n
        checks = {
            "alpha_n": 1.0 / (40.0 * (n - 1)),
            "eps0": 1.0 / 42.0,
            "eps1": self["eps0"] / math.sqrt(1.0 + 2.0 * self["alpha_n"] * self["eps0"] ** 2),
            "lambda_n": 2.0 * self["alpha_n"] + self["eps0"] ** -2,
            "sigma_n": n * (n + 2) / 2.0,
        }
        for key, want in checks.items():
            have = self[key]
            if abs(have - want) > tol * max(1.0, abs(want)):
                raise AssertionError(f"registry cross-check failed for {key}: "
                                     f"{have!r} vs {want!r}")
        # partial sums of the defining series must approach sigma_n
        x = n / (n + 2.0)
        partial = sum(2.0 * k * x ** k for k in range(200))
        if abs(partial - self["sigma_n"]) > 1e-12:
            raise AssertionError("sigma_n series check failed")
        return True


def constants(n, kappa=1.0, overrides=None):
    """Build the constant registry for dimension n."""
    return ConstantRegistry(n, kappa=kappa, overrides=overrides)

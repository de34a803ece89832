import math

import numpy as np
import pytest

from ricci_lab.geometry import (WarpedProfile, flat_disk, perturbed_sphere,
                                round_sphere)


@pytest.fixture(scope="session")
def unit_sphere():
    return round_sphere(3, 1.0, 256)


@pytest.fixture(scope="session")
def unit_sphere_fine():
    return round_sphere(3, 1.0, 512)


@pytest.fixture(scope="session")
def flat_patch():
    return flat_disk(3, 1.0, 128)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)


def spherical_distance(s1, s2, psi):
    """Closed-form great-circle distance on the unit round sphere between
    meridian points (s1, 0) and (s2, psi)."""
    c = (math.cos(s1) * math.cos(s2)
         + math.sin(s1) * math.sin(s2) * math.cos(psi))
    return math.acos(max(-1.0, min(1.0, c)))


def cap_volume(r):
    """Closed-form volume of an r-ball on the unit round 3-sphere."""
    return math.pi * (2.0 * r - math.sin(2.0 * r))


def plateau_neck(eps=5e-3, width=0.55, power=8, m=512):
    """Sphere profile pinched to a long thin band around the equator; the
    collapsed region has huge positive scalar curvature (sphere fibers)."""
    grid = np.linspace(0.0, math.pi, m + 1)
    bump = np.exp(-(((grid - math.pi / 2) / width) ** 2) ** (power // 2))
    phi = np.sin(grid) * (1.0 - (1.0 - eps) * bump)
    phi[0] = phi[-1] = 0.0
    return WarpedProfile(3, grid, phi)

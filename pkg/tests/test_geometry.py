import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci_lab.geometry import (BAND, DISK, HomogeneousState,
                                InvalidGeometryError, MILNOR_SIGNATURES,
                                WarpedProfile, curvature_homogeneous,
                                curvature_warped, flat_disk, hyperbolic_disk,
                                perturbed_sphere, round_sphere)


# -- independent oracles ---------------------------------------------------------


def constant_curvature_tensor_norms(n, k):
    """Brute-force contraction of R_ijkl = K (g_ik g_jl - g_il g_jk)."""
    g = np.eye(n)
    riem = k * (np.einsum("ik,jl->ijkl", g, g)
                - np.einsum("il,jk->ijkl", g, g))
    rm2 = np.einsum("ijkl,ijkl->", riem, riem)
    ricci = np.einsum("ikjk->ij", riem)
    scalar = np.trace(ricci)
    return rm2, scalar


def product_metric_tensor_norms(k_fiber):
    """R x S^2(k) product: only fiber-plane curvature k_fiber survives."""
    n = 3
    riem = np.zeros((n, n, n, n))
    # fiber directions are 1, 2; plane (1,2) carries sectional k_fiber
    for (i, j, kk, ll, val) in [(1, 2, 1, 2, k_fiber), (2, 1, 2, 1, k_fiber),
                                (1, 2, 2, 1, -k_fiber), (2, 1, 1, 2, -k_fiber)]:
        riem[i, j, kk, ll] = val
    rm2 = np.einsum("ijkl,ijkl->", riem, riem)
    ricci = np.einsum("ikjk->ij", riem)
    return rm2, np.trace(ricci)


def milnor_brute_force(group, coeffs):
    """Curvature from the structure constants via the frame Koszul formula,
    independent of the closed Milnor forms used by the module."""
    c = MILNOR_SIGNATURES[group]
    a = np.asarray(coeffs, float)
    # orthonormal frame structure constants: [f_i, f_j] = C_ijk f_k
    lam = np.array([c[0] * math.sqrt(a[0] / (a[1] * a[2])),
                    c[1] * math.sqrt(a[1] / (a[2] * a[0])),
                    c[2] * math.sqrt(a[2] / (a[0] * a[1]))])
    cc = np.zeros((3, 3, 3))
    for (i, j, k), sgn in [((1, 2, 0), 1), ((2, 1, 0), -1),
                           ((2, 0, 1), 1), ((0, 2, 1), -1),
                           ((0, 1, 2), 1), ((1, 0, 2), -1)]:
        cc[i, j, k] = sgn * lam[k]
    gam = np.zeros((3, 3, 3))   # gam[i, j, k] = <nabla_i f_j, f_k>
    for i in range(3):
        for j in range(3):
            for k in range(3):
                gam[i, j, k] = 0.5 * (cc[i, j, k] - cc[j, k, i] + cc[k, i, j])
    riem = np.zeros((3, 3, 3, 3))   # <R(f_i, f_j) f_k, f_l>
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    term = 0.0
                    for m in range(3):
                        term += gam[j, k, m] * gam[i, m, l]
                        term -= gam[i, k, m] * gam[j, m, l]
                        term -= cc[i, j, m] * gam[m, k, l]
                    riem[i, j, k, l] = term
    # components are <R(f_i, f_j) f_k, f_l>; Ricci traces first/last slots
    ricci = np.einsum("ijki->jk", riem)
    rm2 = np.einsum("ijkl,ijkl->", riem, riem)
    return riem, ricci, float(np.trace(ricci)), float(rm2)


def test_contraction_oracle_identities():
    for n in (3, 4, 5):
        for k in (1.0, 0.3, -0.7):
            rm2, scalar = constant_curvature_tensor_norms(n, k)
            assert rm2 == pytest.approx(2 * n * (n - 1) * k * k, rel=1e-12)
            assert scalar == pytest.approx(n * (n - 1) * k, rel=1e-12)


# -- warped curvature ------------------------------------------------------------


def test_unit_sphere_curvature(unit_sphere_fine):
    cf = curvature_warped(unit_sphere_fine)
    rm2_exact, scalar_exact = constant_curvature_tensor_norms(3, 1.0)
    assert np.max(np.abs(cf.rm_norm - math.sqrt(rm2_exact))) < 1e-6
    assert np.max(np.abs(cf.scalar - scalar_exact)) < 1e-6
    assert np.max(np.abs(cf.k_rad - 1.0)) < 1e-6
    assert np.max(np.abs(cf.k_orb - 1.0)) < 1e-6
    assert np.max(np.abs(cf.ric_rad - 2.0)) < 2e-6
    assert np.max(np.abs(cf.ric_orb - 2.0)) < 2e-6


def test_cylinder_band_matches_product_oracle():
    rm2_exact, scalar_exact = product_metric_tensor_norms(1.0)
    assert rm2_exact == pytest.approx(4.0)
    grid = np.linspace(0.0, 1.0, 65)
    band = WarpedProfile(3, grid, np.ones(65), BAND)
    cf = curvature_warped(band)
    assert np.max(np.abs(cf.rm_norm - math.sqrt(rm2_exact))) < 1e-10
    assert np.max(np.abs(cf.scalar - scalar_exact)) < 1e-10
    assert np.max(np.abs(cf.k_rad)) < 1e-10
    assert np.max(np.abs(cf.k_orb - 1.0)) < 1e-10


def test_flat_disk_is_flat(flat_patch):
    cf = curvature_warped(flat_patch)
    assert np.max(np.abs(cf.rm_norm)) < 1e-10
    assert np.max(np.abs(cf.scalar)) < 1e-10


def test_hyperbolic_disk_curvature():
    cf = curvature_warped(hyperbolic_disk(3, 1.0, 1.2, 256))
    assert np.max(np.abs(cf.k_rad + 1.0)) < 1e-6
    assert np.max(np.abs(cf.k_orb + 1.0)) < 1e-6


def test_second_order_convergence():
    errs = []
    for m in (128, 256, 512):
        cf = curvature_warped(round_sphere(3, 1.0, m))
        errs.append(np.max(np.abs(cf.rm_norm - math.sqrt(12.0))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    for order in orders:
        assert 1.7 <= order <= 2.3, orders


@given(st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=20, deadline=None)
def test_scaling_covariance(c):
    p = perturbed_sphere(3, 1.0, 64, amplitudes=(0.08, -0.04))
    cf = curvature_warped(p)
    cf_scaled = curvature_warped(WarpedProfile(3, c * p.grid, c * p.phi))
    assert np.allclose(cf_scaled.rm_norm, cf.rm_norm / c ** 2, rtol=1e-12,
                       atol=1e-12 * cf.rm_max)
    assert np.allclose(cf_scaled.scalar, cf.scalar / c ** 2, rtol=1e-12,
                       atol=1e-12 * np.max(np.abs(cf.scalar)))


def test_constant_curvature_identity_on_round_profiles():
    for radius in (0.5, 1.0, 2.0):
        cf = curvature_warped(round_sphere(3, radius, 256))
        k = 1.0 / radius ** 2
        assert np.max(np.abs(cf.rm_norm ** 2 - 12 * k * k)) < 1e-4 * k * k


def test_pole_values_match_interior_limit():
    p = perturbed_sphere(3, 1.0, 512, amplitudes=(0.1,))
    cf = curvature_warped(p)
    # smooth closure: both sectionals agree at a pole
    assert cf.k_rad[0] == cf.k_orb[0]
    assert abs(cf.k_rad[0] - cf.k_rad[1]) < 0.05 * max(1.0, abs(cf.k_rad[0]))


# -- homogeneous curvature -------------------------------------------------------


@given(st.tuples(st.floats(0.3, 3.0), st.floats(0.3, 3.0),
                 st.floats(0.3, 3.0)),
       st.sampled_from(["su2", "nil", "sol"]))
@settings(max_examples=40, deadline=None)
def test_homogeneous_matches_brute_force(coeffs, group):
    state = HomogeneousState(group, coeffs)
    cf = curvature_homogeneous(state)
    riem, ricci, scalar, rm2 = milnor_brute_force(group, coeffs)
    assert cf.scalar == pytest.approx(scalar, rel=1e-10, abs=1e-10)
    assert cf.rm_norm ** 2 == pytest.approx(rm2, rel=1e-10, abs=1e-10)
    assert sorted(cf.ricci) == pytest.approx(sorted(np.diag(ricci)),
                                             rel=1e-10, abs=1e-10)


def test_su2_round_normalization():
    cf = curvature_homogeneous(HomogeneousState("su2", (1.0, 1.0, 1.0)))
    # round metric with sectional curvature 1/4 fixed by the oracle
    assert cf.sectional == pytest.approx((0.25, 0.25, 0.25))
    assert cf.ricci == pytest.approx((0.5, 0.5, 0.5))
    assert cf.scalar == pytest.approx(1.5)


@given(st.tuples(st.floats(0.2, 5.0), st.floats(0.2, 5.0),
                 st.floats(0.2, 5.0)))
@settings(max_examples=25, deadline=None)
def test_nil_scalar_negative(coeffs):
    cf = curvature_homogeneous(HomogeneousState("nil", coeffs))
    assert cf.scalar < 0


def test_sol_reference_value():
    cf = curvature_homogeneous(HomogeneousState("sol", (1.0, 1.0, 1.0)))
    assert cf.scalar == pytest.approx(-2.0)


def test_unknown_group_rejected():
    with pytest.raises(InvalidGeometryError):
        HomogeneousState("heisenberg", (1.0, 1.0, 1.0))
    with pytest.raises(InvalidGeometryError):
        HomogeneousState("su2", (1.0, -1.0, 1.0))


# -- validation and serialization ------------------------------------------------


def test_profile_validation_errors():
    grid = np.linspace(0, math.pi, 65)
    with pytest.raises(InvalidGeometryError):   # too coarse
        WarpedProfile(3, grid[:10], np.sin(grid[:10]))
    with pytest.raises(InvalidGeometryError):   # negative interior
        bad = np.sin(grid).copy()
        bad[30] = -0.1
        WarpedProfile(3, grid, bad)
    with pytest.raises(InvalidGeometryError):   # broken pole closure
        WarpedProfile(3, grid, 3.0 * np.sin(grid))
    with pytest.raises(InvalidGeometryError):   # non-uniform grid
        g2 = grid.copy()
        g2[5] += 0.3 * (grid[1] - grid[0])
        WarpedProfile(3, g2, np.sin(g2))
    with pytest.raises(InvalidGeometryError):
        WarpedProfile(2, grid, np.sin(grid))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=20, deadline=None)
def test_serialization_round_trip(seed):
    p = perturbed_sphere(3, 1.0, 48, seed=seed, amplitude=0.1)
    q = WarpedProfile.from_json(p.to_json())
    assert q.n == p.n and q.topology == p.topology
    assert np.allclose(q.phi, p.phi, rtol=1e-15, atol=0)
    assert np.allclose(q.grid, p.grid, rtol=1e-15, atol=1e-15 * p.length)


def test_disk_serialization_round_trip(flat_patch):
    q = WarpedProfile.from_json(flat_patch.to_json())
    assert q.topology == DISK
    assert np.array_equal(q.phi, flat_patch.phi)


def test_random_family_pole_smoothness(rng):
    # the modulated family keeps exact odd closure: slopes are +-1 up to
    # the one-sided-difference residue ~ K h^2/6
    for seed in range(5):
        p = perturbed_sphere(3, 1.0, 256, seed=seed, amplitude=0.2)
        h = p.spacing
        assert abs(p.phi[1] / h - 1.0) < 5 * h * h + 1e-3
        assert abs(p.phi[-2] / h - 1.0) < 5 * h * h + 1e-3

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricci_lab.constants import (ConstantRegistry, constants,
                                 sigma_series_value, unit_ball_volume,
                                 unit_sphere_volume)


def test_explicit_constants_exact():
    reg = constants(3)
    assert reg["alpha_n"] == 1.0 / 80.0 == 0.0125
    assert reg["eps0"] == 1.0 / 42.0
    assert reg["sigma_n"] == 7.5
    assert abs(reg["lambda_n"] - (2 * 0.0125 + 42.0 ** 2)) < 1e-15 * 1764
    assert reg["lambda_n"] == pytest.approx(1764.025, abs=1e-12)
    assert reg["eps1"] == reg["eps0"] / math.sqrt(
        1.0 + 2.0 * reg["alpha_n"] * reg["eps0"] ** 2)
    assert reg["eps1"] < reg["eps0"]
    assert reg.self_check()


@given(st.integers(min_value=3, max_value=12))
@settings(max_examples=10, deadline=None)
def test_sigma_matches_series(n):
    x = n / (n + 2.0)
    partial = sum(2.0 * k * x ** k for k in range(400))
    assert sigma_series_value(n) == pytest.approx(partial, abs=1e-10)
    assert sigma_series_value(n) == n * (n + 2) / 2.0


def test_sigma_increasing():
    vals = [sigma_series_value(n) for n in range(1, 10)]
    assert all(b > a > 0 for a, b in zip(vals, vals[1:]))


def test_volume_conventions():
    reg = constants(3)
    assert reg["omega_sphere"] == pytest.approx(2 * math.pi ** 2)
    assert reg["omega_ball"] == pytest.approx(4 * math.pi / 3)
    assert unit_sphere_volume(2) == pytest.approx(4 * math.pi)
    assert unit_ball_volume(2) == pytest.approx(math.pi)


def test_kappa_conversion_factor():
    reg = constants(3)
    assert reg["kappa_conversion"] == pytest.approx(12.0 ** -0.75)


def test_overrides_tracked():
    reg = constants(3, overrides={"c_curvature": 2.0})
    assert reg["c_curvature"] == 2.0
    assert reg.entry("c_curvature").provenance == "user"
    assert reg.entry("alpha_n").provenance == "paper-explicit"
    with pytest.raises(KeyError):
        reg.override("no_such_constant", 1.0)


def test_c0_clears_flat_limit_floor():
    # as t -> 0 the averaged-window bound tends to
    # c0 * w_n^(2/n) eps1^2 / 4 times the curvature, so c0 must exceed
    # 4 w_n^(-2/n) / eps1^2 for the conclusion to survive the flat limit
    for n in (3, 4):
        reg = constants(n)
        floor = 4.0 * reg["omega_ball"] ** (-2.0 / n) / reg["eps1"] ** 2
        for key in ("c0_A", "c0_B", "c0_C"):
            assert reg[key] > floor


def test_dimension_validation():
    with pytest.raises(ValueError):
        constants(2)
    with pytest.raises(ValueError):
        constants(3, kappa=-1.0)


def test_registry_dict_view():
    view = constants(3).as_dict()
    assert view["eps0"]["provenance"] == "paper-explicit"
    assert {"alpha_n", "delta0_A", "c0_B", "bishop_c"} <= set(view)

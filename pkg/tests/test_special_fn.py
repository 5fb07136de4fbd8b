import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from kernelpde.errors import KernelPDEError, UnsupportedDimensionError
from kernelpde.special_fn import (
    GreenParams,
    bessel_k,
    green_eval,
    green_fourier,
    green_l2_norm_sq,
    green_profile,
    sphere_area,
)

ORDERS = [0, 1, 0.5, -0.5, 1.5, -1.5]


@pytest.mark.parametrize("nu", ORDERS)
def test_bessel_k_matches_scipy(nu):
    r = np.geomspace(1e-8, 50.0, 400)
    ref = special.kv(nu, r)
    assert np.max(np.abs(bessel_k(nu, r) / ref - 1)) < 1e-13


@pytest.mark.parametrize("nu", [0, 1])
def test_bessel_k_branch_point_is_continuous(nu):
    lo, hi = bessel_k(nu, np.nextafter(2.0, 0.0)), bessel_k(nu, 2.0 + 1e-15)
    assert abs(lo / hi - 1) < 1e-13


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-6, max_value=200.0), st.sampled_from(ORDERS))
def test_bessel_k_property_against_scipy(r, nu):
    ref = special.kv(nu, r)
    assert math.isclose(bessel_k(nu, r), ref, rel_tol=1e-12)


def test_bessel_k_scalar_in_scalar_out():
    assert isinstance(bessel_k(0, 1.0), float)
    assert bessel_k(1, np.ones((2, 3))).shape == (2, 3)


@pytest.mark.parametrize("r", [0.0, -1.0, np.nan])
def test_bessel_k_rejects_nonpositive(r):
    with pytest.raises(KernelPDEError):
        bessel_k(0, r)


def test_bessel_k_rejects_unsupported_order():
    with pytest.raises(KernelPDEError, match="unsupported"):
        bessel_k(2, 1.0)


def test_green_profile_origin_values():
    assert green_profile(1, 0.0) == 0.5
    assert np.isinf(green_profile(2, 0.0))
    assert np.isinf(green_profile(3, 0.0))


def test_green_profile_elementary_forms():
    r = np.linspace(0.01, 20, 50)
    np.testing.assert_allclose(green_profile(1, r), 0.5 * np.exp(-r), rtol=1e-14)
    np.testing.assert_allclose(green_profile(3, r), np.exp(-r) / (4 * np.pi * r), rtol=1e-14)
    np.testing.assert_allclose(green_profile(2, r), special.k0(r) / (2 * np.pi), rtol=1e-13)


@pytest.mark.parametrize("n", [0, 4, 5])
def test_green_profile_rejects_other_dimensions(n):
    with pytest.raises(UnsupportedDimensionError):
        green_profile(n, 1.0)


def test_green_eval_scaling():
    for n in (1, 2, 3):
        for d in (0.04, 1.0, 7.5):
            r = np.array([0.1, 1.0, 3.0])
            expect = d ** (-n / 2) * green_profile(n, r / math.sqrt(d))
            np.testing.assert_allclose(green_eval(GreenParams(n, d), r), expect, rtol=1e-15)


def test_green_eval_solves_the_ode_in_1d():
    # d k'' - k = 0 away from the origin, with a jump -1/d in k'
    d, h = 1.7, 1e-4
    p = GreenParams(1, d)
    r = 0.8
    k2 = (green_eval(p, r + h) - 2 * green_eval(p, r) + green_eval(p, r - h)) / h**2
    assert abs(d * k2 - green_eval(p, r)) < 1e-6
    slope = (green_eval(p, h) - green_eval(p, 0.0)) / h
    assert abs(2 * slope + 1 / d) < 1e-3


@pytest.mark.parametrize("d", [0.0, -1.0, math.inf, math.nan])
def test_green_params_validation(d):
    with pytest.raises(KernelPDEError):
        GreenParams(1, d)


def test_green_fourier_symbol():
    s = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(green_fourier(2.0, s), [1.0, 1 / 3, 1 / 9])


def test_green_l2_norm_closed_forms():
    for d in (0.041, 1.0, 1.989):
        assert math.isclose(green_l2_norm_sq(1, d), 0.25 / math.sqrt(d), rel_tol=1e-15)
        assert math.isclose(green_l2_norm_sq(2, d), 1 / (4 * math.pi * d), rel_tol=1e-15)
        assert math.isclose(green_l2_norm_sq(3, d), d**-1.5 / (8 * math.pi), rel_tol=1e-15)
    with pytest.raises(UnsupportedDimensionError):
        green_l2_norm_sq(4, 1.0)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)

import math

import numpy as np
import pytest

from kernelpde.errors import KernelPDEError, QuadratureError
from kernelpde.radial_kernel import (
    QUAD_TOL_ENV,
    DecayHint,
    RadialKernel,
    default_quad_tol,
    gaussian_kernel,
    green_kernel,
    green_sum_kernel,
    hm_inner,
    hm_norm,
    load_tabulated_kernel,
    radial_fourier_transform,
    radial_quadrature,
    standard_l2_factor,
    tabulated_kernel,
    zero_kernel,
)
from kernelpde.special_fn import green_l2_norm_sq


@pytest.mark.parametrize(
    "g, exact",
    [
        (lambda x: math.exp(-x), 1.0),
        (lambda x: 1.0 / (1.0 + x * x), math.pi / 2),
        (lambda x: math.exp(-x * x), math.sqrt(math.pi) / 2),
        (lambda x: x * x / (1.0 + x * x) ** 2, math.pi / 4),
    ],
)
def test_radial_quadrature_known_integrals(g, exact):
    assert radial_quadrature(g, 1e-12) == pytest.approx(exact, rel=1e-11)


def test_radial_quadrature_start_offset():
    assert radial_quadrature(lambda x: math.exp(-x), 1e-12, start=2.0) == pytest.approx(math.exp(-2), rel=1e-11)


def test_radial_quadrature_non_decaying_raises():
    with pytest.raises(QuadratureError):
        radial_quadrature(lambda x: 1.0, 1e-10, max_doublings=10)


def test_radial_quadrature_rejects_bad_arguments():
    with pytest.raises(KernelPDEError):
        radial_quadrature(lambda x: 0.0, -1.0)
    with pytest.raises(KernelPDEError):
        radial_quadrature(lambda x: 0.0, 1e-8, scale=0.0)


def test_quad_tol_env_override(monkeypatch):
    monkeypatch.setenv(QUAD_TOL_ENV, "1e-7")
    assert default_quad_tol() == 1e-7
    monkeypatch.setenv(QUAD_TOL_ENV, "-3")
    with pytest.raises(KernelPDEError):
        default_quad_tol()
    monkeypatch.delenv(QUAD_TOL_ENV)
    assert default_quad_tol() == 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_fourier_transform_of_gaussian(n):
    K = gaussian_kernel(n)
    for s in (0.0, 0.3, 1.0, 2.5):
        val = radial_fourier_transform(K.physical_profile, n, s, 1e-11, scale=4.0)
        assert val == pytest.approx(float(K.fourier(s)), rel=1e-8, abs=1e-12)


def test_physical_fallback_inverts_fourier_profile():
    K = gaussian_kernel(1)
    bare = RadialKernel(n=1, fourier_profile=K.fourier_profile, decay_hint=K.decay_hint)
    r = np.array([0.0, 0.5, 2.0])
    np.testing.assert_allclose(bare.physical(r), K.physical(r), rtol=1e-8)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hm_inner_green_norm_matches_gamma_formula(n):
    d = 1.3
    val = hm_inner(green_kernel(n, d), green_kernel(n, d), 0, 1e-12)
    assert val * standard_l2_factor(n) == pytest.approx(green_l2_norm_sq(n, d), rel=1e-10)


def test_hm_inner_weight_and_dimension_checks():
    K = gaussian_kernel(1)
    # m = 1 adds s^2 |Khat|^2 to the integrand
    exact = 4 * math.pi * (math.sqrt(math.pi / 2) / 2 + math.sqrt(math.pi / 2) / 8)
    assert hm_inner(K, K, 1, 1e-12) == pytest.approx(exact, rel=1e-10)
    assert hm_norm(K, 0) == pytest.approx(math.sqrt(4 * math.pi * math.sqrt(math.pi / 2) / 2), rel=1e-9)
    with pytest.raises(KernelPDEError):
        hm_inner(gaussian_kernel(1), gaussian_kernel(2))
    with pytest.raises(KernelPDEError):
        hm_inner(K, K, -1)
    with pytest.raises(KernelPDEError):
        hm_inner(K, K, 0.5)


def test_green_sum_kernel_profiles():
    K = green_sum_kernel(3, [1.0, 2.0], [2.0, -1.0])
    s = np.array([0.0, 1.0])
    np.testing.assert_allclose(K.fourier(s), [1.0, 2 / 2 - 1 / 3])
    assert K.physical(1.0) == pytest.approx(
        2 * green_kernel(3, 1.0).physical(1.0) - green_kernel(3, 2.0).physical(1.0)
    )
    with pytest.raises(KernelPDEError):
        green_sum_kernel(1, [1.0], [1.0, 2.0])


def test_zero_kernel():
    z = zero_kernel(2)
    assert float(z.fourier(1.0)) == 0.0
    assert hm_inner(z, gaussian_kernel(2)) == 0.0


def test_decay_hint_parse_and_extend():
    h = DecayHint.parse("gaussian:2")
    assert h.kind == "gaussian" and h.rate == 2.0
    assert h.extend(1.0, 3.0, np.array([1.0]))[0] == pytest.approx(3.0)
    assert h.extend(1.0, 3.0, np.array([2.0]))[0] == pytest.approx(3.0 * math.exp(-2 * 3))
    with pytest.raises(KernelPDEError):
        DecayHint.parse("weird:1")
    assert DecayHint.parse("algebraic").rate == 1.0
    with pytest.raises(KernelPDEError):
        DecayHint.parse("gaussian:fast")


def test_tabulated_kernel_interpolates_and_extrapolates():
    s = np.linspace(0, 6, 1201)
    v = math.sqrt(4 * math.pi) * np.exp(-s * s)
    K = tabulated_kernel(1, s, v, DecayHint("gaussian", 1.0))
    x = np.array([0.123, 1.7, 5.9, 6.5, 9.0])
    ref = math.sqrt(4 * math.pi) * np.exp(-x * x)
    assert np.max(np.abs(K.fourier(x) - ref)) < 1e-5
    assert 0 < K.interpolation_error < 1e-4
    # without a hint the profile vanishes past the table
    assert float(tabulated_kernel(1, s, v).fourier(7.0)) == 0.0


def test_tabulated_kernel_error_bound_is_honest():
    s = np.linspace(0, 6, 2001)
    v = math.sqrt(4 * math.pi) * np.exp(-s * s)
    K = tabulated_kernel(1, s, v, DecayHint("gaussian", 1.0))
    x = np.linspace(0, 6, 20001)
    true_err = np.max(np.abs(K.fourier(x) - math.sqrt(4 * math.pi) * np.exp(-x * x)))
    assert true_err <= K.interpolation_error <= 4 * true_err


@pytest.mark.parametrize(
    "s, v",
    [
        ([0.0, 1.0, 1.0], [1.0, 0.5, 0.2]),
        ([-1.0, 0.0, 1.0], [1.0, 0.5, 0.2]),
        ([0.0, 1.0, 2.0], [1.0, np.nan, 0.2]),
        ([0.0], [1.0]),
    ],
)
def test_tabulated_kernel_rejects_bad_tables(s, v):
    with pytest.raises(KernelPDEError):
        tabulated_kernel(1, s, v)


def test_load_tabulated_kernel(tmp_path):
    path = tmp_path / "k.txt"
    path.write_text("# s khat\n0 1\n1 0.5\n2 0.2\n3 0.1\n")
    K = load_tabulated_kernel(path, 2)
    assert float(K.fourier(1.0)) == pytest.approx(0.5)
    assert K.name == "k.txt"
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n1 2 3\n")
    with pytest.raises(KernelPDEError):
        load_tabulated_kernel(bad, 1)
    with pytest.raises(KernelPDEError):
        load_tabulated_kernel(tmp_path / "missing.txt", 1)


def test_standard_l2_factor():
    assert standard_l2_factor(1) == pytest.approx(1 / math.pi)
    assert standard_l2_factor(3) == pytest.approx(4 * math.pi / (2 * math.pi) ** 3)

"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy import integrate

import conftest
from kernelpde.convolution import (
    GridField,
    approximate_convolution,
    convolve_direct,
    error_report,
    screened_poisson_solve,
)
from kernelpde.fitting import (
    DiffusionSet,
    PhiBasis,
    assemble,
    cauchy_solve,
    fit,
    fit_hm,
    gram_entry,
    gram_entry_quadrature,
    required_depth,
    solve_coefficients,
)
from kernelpde.radial_kernel import RadialKernel, gaussian_kernel, green_sum_kernel, radial_fourier_transform
from kernelpde.special_fn import GreenParams, green_eval, green_l2_norm_sq
from kernelpde.validate import phi_identity_error, random_diffusion_set


def record(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_gram_closed_forms(rng):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3):
        for dj, dl in rng.uniform(0.04, 10.0, size=(100, 2)):
            fj = lambda s, d=dj: 1.0 / (1.0 + d * s * s)  # noqa: E731
            fl = lambda s, d=dl: 1.0 / (1.0 + d * s * s)  # noqa: E731
            ref = gram_entry_quadrature(n, 0, fj, fl, 1e-12)
            worst = max(worst, abs(gram_entry(n, dj, dl) - ref) / abs(ref))
    secs = time.perf_counter() - t0
    record(1, "Gram closed forms", worst <= 1e-8 and secs < 10, f"max rel err {worst:.1e}, {secs:.1f}s")


def test_criterion_2_green_identities():
    ds = (0.041, 1.0, 1.989)
    hankel = mass = l2 = 0.0
    for n in (1, 2, 3):
        for d in ds:
            p = GreenParams(n, d)
            prof = lambda r, p=p: float(green_eval(p, r))  # noqa: E731
            for s in (0.1, 0.5, 1.0, 2.0, 5.0):
                val = radial_fourier_transform(prof, n, s, 1e-10, scale=math.sqrt(d))
                hankel = max(hankel, abs(val - 1.0 / (1.0 + d * s * s)))
            # independent oracle: scipy quad in the physical variable
            omega = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}[n]
            pts = (math.sqrt(d),)
            m = sum(
                integrate.quad(lambda r: omega * r ** (n - 1) * prof(r), a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                for a, b in ((0, pts[0]), (pts[0], 60 * pts[0]))
            )
            mass = max(mass, abs(m - 1.0))
            gamma = {1: 0.25 / math.sqrt(d), 3: d ** -1.5 / (8.0 * math.pi)}
            if n in gamma:
                l2 = max(l2, abs(green_l2_norm_sq(n, d) - gamma[n]) / gamma[n])
            q = sum(
                integrate.quad(lambda r: omega * r ** (n - 1) * prof(r) ** 2, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
                for a, b in ((0, pts[0]), (pts[0], 60 * pts[0]))
            )
            l2 = max(l2, abs(q - green_l2_norm_sq(n, d)) / green_l2_norm_sq(n, d))
    ok = hankel <= 1e-6 and mass <= 1e-8 and l2 <= 1e-10
    record(2, "Green identities", ok, f"Fourier err {hankel:.1e}, mass err {mass:.1e}, L2 rel err {l2:.1e}")


def test_criterion_3_exact_span_recovery(rng):
    worst = worst_res = 0.0
    for n in (1, 2, 3):
        for size in range(1, 7):
            ds = random_diffusion_set(rng, size, 0.2, 5.0)
            c = rng.uniform(-1.0, 1.0, size=size)
            K = green_sum_kernel(n, ds, c)
            a = fit(K, ds)
            worst = max(worst, float(np.max(np.abs(a.alpha - c)) / np.max(np.abs(c))))
            worst_res = max(worst_res, a.residual_sq / assemble(K, ds).k_norm_sq)
    ok = worst <= 1e-6 and worst_res <= 1e-10
    record(3, "exact-span recovery", ok, f"coef rel err {worst:.1e}, residual/|K|^2 {worst_res:.1e}")


def test_criterion_4_gaussian_fit_properties():
    t0 = time.perf_counter()
    ds = DiffusionSet.one_plus_sin(10)
    parts = []
    ok = True
    for n in (1, 2, 3):
        K = gaussian_kernel(n)
        fits = [fit(K, ds.head(N)) for N in range(1, 11)]
        res = [f.residual_sq for f in fits]
        dec = all(b < a for a, b in zip(res, res[1:]))
        alpha = fits[-1].alpha
        big = np.max(np.abs(alpha)) >= 1e5
        mixed = bool((alpha > 0).any() and (alpha < 0).any())
        ok &= dec and big and mixed
        parts.append(f"n={n} decreasing={dec} max|a|={np.max(np.abs(alpha)):.1e} mixed={mixed}")
        if n == 3:
            final = fits[-1]
            near = float(final.physical(1e-6))
            diverges = abs(near) > 1e3 * abs(float(K.physical(1e-6)))
            rr = np.linspace(0.5, 4.0, 200)
            window = float(np.max(np.abs(final.physical(rr) / K.physical(rr) - 1.0)))
            ok &= diverges and window <= 5e-2
            parts.append(f"n=3 K_N(1e-6)={near:.2e} window err {window:.1e}")
    secs = time.perf_counter() - t0
    ok &= secs < 60
    record(4, "Gaussian reproduction", ok, "; ".join(parts) + f"; {secs:.1f}s")


def test_criterion_5_convolution_engine():
    K = gaussian_kernel(1)
    approx = fit(K, DiffusionSet.one_plus_sin(10))
    inputs = {
        "gaussian": lambda x: np.exp(-x * x),
        "modulated": lambda x: np.exp(-x * x / 20.0) * np.cos(x),
        "sech2": lambda x: 1.0 / np.cosh(x) ** 2,
    }
    ratios = []
    young = True
    for fn in inputs.values():
        f = GridField.from_function(fn, 4096, 40.0)
        rep = error_report(f, K, approx, 1e-3)
        young &= rep.l2 <= rep.kernel_l2_error * rep.f_l1 * (1 + 1e-3)
        ratios.append(rep.l2 / (rep.kernel_l2_error * rep.f_l1))
    # cos(kx) is an eigenfunction of every Green convolution on the grid
    eig = expansion = 0.0
    L = 40.0
    for mode in (1, 7, 100):
        k = 2 * math.pi * mode / L
        f = GridField.from_function(lambda x: np.cos(k * x), 4096, L)
        for d in (0.3, 1.0, 1.9):
            eig = max(eig, float(np.max(np.abs(screened_poisson_solve(f, d).values - f.values / (1 + d * k * k)))))
        expect = math.sqrt(4 * math.pi) * math.exp(-k * k) * f.values
        eig = max(eig, float(np.max(np.abs(convolve_direct(f, K).values - expect))))
        # the Gaussian expansion sums terms of size |alpha_j| ~ 1e7 that cancel,
        # so its exactness is measured in units of eps * sum|alpha_j|
        expect = float(approx.fourier(k)) * f.values
        err = float(np.max(np.abs(approximate_convolution(f, approx).values - expect)))
        expansion = max(expansion, err / (np.finfo(float).eps * np.sum(np.abs(approx.alpha))))
    ok = young and eig <= 1e-12 and expansion <= 16
    record(
        5,
        "convolution engine",
        ok,
        f"max lhs/Young bound {max(ratios):.2f}, eigenfunction err {eig:.1e}, "
        f"expansion err {expansion:.1f} eps*sum|alpha|",
    )


def test_criterion_6_phi_basis(rng):
    worst = 0.0
    for _ in range(10):
        J = int(rng.integers(1, 5))
        ds = random_diffusion_set(rng, J + int(rng.integers(1, 4)), 0.2, 5.0)
        s = np.exp(rng.uniform(math.log(0.01), math.log(100.0), size=20))
        worst = max(worst, phi_identity_error(J, ds, s))
    worst_res = 0.0
    for n, m in ((1, 1), (2, 1), (3, 0)):
        ds = DiffusionSet((0.5, 1.3, 2.2, 3.7, 4.4))
        J = required_depth(m, n)
        phi1 = PhiBasis.build(ds, J).profile(1)
        a = fit_hm(RadialKernel(n=n, fourier_profile=phi1, name="phi1"), ds, m=m, J=J)
        worst_res = max(worst_res, a.residual_sq)
    ok = worst <= 1e-10 and worst_res <= 1e-10
    record(6, "phi-basis identities", ok, f"partial-fraction err {worst:.1e}, fit_hm(phi_1) residual {worst_res:.1e}")


def test_criterion_7_positive_definite_and_cauchy(rng):
    failures = compared = 0
    worst = 0.0
    for _ in range(50):
        ds = random_diffusion_set(rng, int(rng.integers(1, 13)))
        for n in (1, 2, 3):
            sys = assemble(gaussian_kernel(n), ds)
            try:
                a = solve_coefficients(sys)
            except Exception:
                failures += 1
                continue
            if n in (1, 3) and a.condition_estimate < 1e8:
                c = np.asarray(cauchy_solve(ds, sys.b, n), dtype=float)
                worst = max(worst, float(np.max(np.abs(c - a.alpha)) / np.max(np.abs(a.alpha))))
                compared += 1
    ok = failures == 0 and worst <= 1e-6 and compared > 0
    record(7, "Cholesky and Cauchy", ok, f"{failures} Cholesky failures; Cauchy rel diff {worst:.1e} over {compared} systems")


def test_criterion_8_no_rate_criterion(gaussian_fits):
    # only the monotone residual of criterion 4(a) is required
    ok = all(
        all(b.residual_sq < a.residual_sq for a, b in zip(fits, fits[1:])) for fits in gaussian_fits.values()
    )
    record(8, "qualitative convergence", ok, "monotone residual N=1..10 in n=1,2,3 (no rate imposed)")

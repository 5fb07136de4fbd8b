"""Modified Bessel functions and the screened-Poisson Green function.

Only the orders that occur for dimensions one to three are supported:
``nu`` in {0, 1} and the half-integers {-3/2, -1/2, 1/2, 3/2}. The
half-integer orders have elementary closed forms; orders 0 and 1 use the
ascending series for ``r <= 2`` and Steed's continued fraction above it.

The Green function ``k(x; d)`` solves ``d*Lap(k) - k + delta = 0`` on R^n
and is evaluated through the normalized profile

    G(r) = (2*pi)**(-n/2) * r**(1 - n/2) * K_{n/2-1}(r),
    k(r; d) = d**(-n/2) * G(r / sqrt(d)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import KernelPDEError, UnsupportedDimensionError

__all__ = [
    "GreenParams",
    "bessel_k",
    "green_profile",
    "green_eval",
    "green_fourier",
    "green_l2_norm_sq",
    "sphere_area",
]

EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 30
_CF_MAXITER = 10_000
_SUPPORTED_ORDERS = (0.0, 1.0, 0.5, 1.5)


def _as_array(r):
    arr = np.asarray(r, dtype=float)
    return arr, arr.ndim == 0


def _k01_series(x):
    """K0 and K1 by their ascending series; accurate for 0 < x <= 2."""
    y = 0.25 * x * x
    log_term = np.log(0.5 * x) + EULER_GAMMA
    i0 = np.zeros_like(x)
    i1 = np.zeros_like(x)
    s0 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    # t0 = y^k / (k!)^2, t1 = y^k / (k! (k+1)!)
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    harm = 0.0  # H_k
    for k in range(_SERIES_TERMS):
        if k > 0:
            t0 = t0 * y / (k * k)
            t1 = t1 * y / (k * (k + 1))
            harm += 1.0 / k
        i0 += t0
        i1 += t1
        s0 += t0 * harm
        # psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2*gamma; the gamma part joins log_term
        s1 += t1 * (2.0 * harm + 1.0 / (k + 1))
    i1 = 0.5 * x * i1
    k0 = -log_term * i0 + s0
    k1 = 1.0 / x + log_term * i1 - 0.25 * x * s1
    return k0, k1


def _k01_scaled_cf(x):
    """exp(x)*K0 and exp(x)*K1 by Steed's method (Temme's CF2), for x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    done = np.zeros(x.shape, dtype=bool)
    for i in range(2, _CF_MAXITER):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        step = np.where(done, 0.0, (b * d - 1.0) * delh)
        delh = step
        h = h + step
        dels = q * step
        s = s + dels
        done |= np.abs(dels) < 1e-17 * np.abs(s)
        if done.all():
            break
    else:  # pragma: no cover - convergence is fast for x >= 2
        raise KernelPDEError("continued fraction for K0/K1 did not converge")
    h = a1 * h
    k0s = np.sqrt(np.pi / (2.0 * x)) / s
    k1s = k0s * (x + 0.5 - h) / x
    return k0s, k1s


def _k01(x):
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= 2.0
    if small.any():
        k0[small], k1[small] = _k01_series(x[small])
    if (~small).any():
        xl = x[~small]
        k0s, k1s = _k01_scaled_cf(xl)
        scale = np.exp(-xl)
        k0[~small] = k0s * scale
        k1[~small] = k1s * scale
    return k0, k1


def bessel_k(nu: float, r):
    """Modified Bessel function of the second kind ``K_nu(r)``.

    Parameters
    ----------
    nu : float
        Order; one of 0, +-1/2, 1, +-3/2 (``K_nu = K_{-nu}``).
    r : float or array_like
        Strictly positive argument.

    Returns
    -------
    float or ndarray
        Same shape as ``r``.
    """
    order = abs(float(nu))
    if order not in _SUPPORTED_ORDERS:
        raise KernelPDEError(f"unsupported Bessel order {nu!r}; expected one of 0, 1, +-1/2, +-3/2")
    x, scalar = _as_array(r)
    if np.any(~(x > 0)):
        raise KernelPDEError("bessel_k requires r > 0 (K_nu diverges at the origin)")
    if order == 0.5:
        out = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x)
    elif order == 1.5:
        out = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) * (1.0 + 1.0 / x)
    else:
        k0, k1 = _k01(np.atleast_1d(x).ravel())
        out = (k0 if order == 0.0 else k1).reshape(x.shape)
    return float(out) if scalar else out


def _check_dim(n: int) -> None:
    if n not in (1, 2, 3):
        raise UnsupportedDimensionError(
            f"pointwise Green function evaluation supports n in {{1, 2, 3}}, got n={n}"
        )


def green_profile(n: int, r):
    """Normalized Green profile ``G(r)`` on R^n.

    ``G(0)`` is 1/2 for ``n = 1``; for ``n = 2, 3`` the profile is singular at
    the origin and ``inf`` is returned there.
    """
    _check_dim(n)
    x, scalar = _as_array(r)
    if np.any(x < 0):
        raise KernelPDEError("green_profile requires r >= 0")
    out = np.empty_like(x)
    zero = x == 0
    pos = ~zero
    if pos.any():
        xp = x[pos]
        nu = n / 2.0 - 1.0
        out[pos] = (2.0 * np.pi) ** (-n / 2.0) * xp ** (1.0 - n / 2.0) * bessel_k(nu, xp)
    out[zero] = 0.5 if n == 1 else np.inf
    return float(out) if scalar else out


@dataclass(frozen=True)
class GreenParams:
    """Dimension and diffusion constant of one Green function."""

    n: int
    d: float

    def __post_init__(self):
        if not (self.d > 0 and math.isfinite(self.d)):
            raise KernelPDEError(f"diffusion constant must be positive and finite, got {self.d!r}")
        if int(self.n) != self.n or self.n < 1:
            raise KernelPDEError(f"dimension must be a positive integer, got {self.n!r}")


def green_eval(p: GreenParams, r):
    """Scaled Green function ``k(r; d) = d**(-n/2) G(r/sqrt(d))``."""
    x, scalar = _as_array(r)
    out = p.d ** (-p.n / 2.0) * green_profile(p.n, x / math.sqrt(p.d))
    return float(out) if scalar else np.asarray(out)


def green_fourier(d: float, s):
    """Radial Fourier symbol ``1/(1 + d s^2)``; identical in every dimension."""
    if not d > 0:
        raise KernelPDEError("d must be positive")
    return 1.0 / (1.0 + d * np.square(s))


def green_l2_norm_sq(n: int, d: float) -> float:
    """Squared standard L^2(R^n) norm of ``k(.; d)`` for ``n <= 3``."""
    if n not in (1, 2, 3):
        raise UnsupportedDimensionError(
            f"k(.; d) is square integrable only for n <= 3 (got n={n})"
        )
    if not d > 0:
        raise KernelPDEError("d must be positive")
    g_sq = math.gamma(2.0 - n / 2.0) / (
        2.0 ** (n + 1) * math.pi ** ((n - 1) / 2.0) * math.gamma(1.5)
    )
    return d ** (-n / 2.0) * g_sq


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)

"""Radial kernels on R^n and their Fourier-side norms.

A kernel is described primarily by its radial Fourier profile ``Khat(s)``,
``s = |xi|``. Inner products use the radial convention

    <K1, K2>_m = int_0^inf s**(n-1) (1 + s**2)**m Khat1(s) Khat2(s) ds,

which differs from the standard ``H^m(R^n)`` inner product by the positive
factor ``sphere_area(n) / (2*pi)**n``. Minimizers are unaffected by that
factor; :func:`standard_l2_factor` converts when absolute sizes matter.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .errors import KernelPDEError, QuadratureError
from .special_fn import GreenParams, green_eval, sphere_area

__all__ = [
    "DecayHint",
    "RadialKernel",
    "default_quad_tol",
    "radial_quadrature",
    "radial_fourier_transform",
    "hm_inner",
    "hm_norm",
    "standard_l2_factor",
    "gaussian_kernel",
    "green_kernel",
    "green_sum_kernel",
    "zero_kernel",
    "tabulated_kernel",
    "load_tabulated_kernel",
]

QUAD_TOL_ENV = "KERNELPDE_QUAD_TOL"
# QUADPACK refuses epsrel below 50 * machine epsilon.
_MIN_EPSREL = 1.2e-14


def default_quad_tol() -> float:
    """Default relative quadrature tolerance; overridable for diagnostics."""
    raw = os.environ.get(QUAD_TOL_ENV)
    if raw:
        try:
            value = float(raw)
        except ValueError:
            raise KernelPDEError(f"{QUAD_TOL_ENV}={raw!r} is not a number") from None
        if not value > 0:
            raise KernelPDEError(f"{QUAD_TOL_ENV} must be positive")
        return value
    return 1e-10


def _quad_segment(g, a, b, epsrel, epsabs, limit, weight=None, wvar=None):
    kwargs = dict(epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    if weight is not None:
        kwargs.update(weight=weight, wvar=wvar)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(g, a, b, **kwargs)
    # a fourth element is QUADPACK's message on abnormal termination
    return out[0], out[1], len(out) == 3


def radial_quadrature(
    g: Callable[[float], float],
    tol: Optional[float] = None,
    *,
    scale: float = 1.0,
    start: float = 0.0,
    max_doublings: int = 80,
    limit: int = 400,
    weight: Optional[str] = None,
    wvar: Optional[float] = None,
    atol: float = 0.0,
    tail_after: int = 8,
) -> float:
    """Integrate ``g`` over ``[start, inf)``.

    The head ``[start, start + scale]`` is integrated first, then segments of
    doubling length until two consecutive segments contribute less than
    ``tol`` relative to the running total (or less than ``atol``). Each
    segment uses adaptive Gauss-Kronrod quadrature (or QAWO when ``weight``
    is ``'cos'``/``'sin'``). A non-oscillatory integrand still active after
    ``tail_after`` segments has a slow algebraic tail; the remainder is then
    taken in one piece on the infinite interval (QAGI), which resolves such
    tails far more accurately than further doubling.

    Raises
    ------
    QuadratureError
        If the tail does not become negligible within ``max_doublings``
        segments, or the accumulated error bound exceeds ``tol``.
    """
    tol = default_quad_tol() if tol is None else float(tol)
    if not tol > 0:
        raise KernelPDEError("tol must be positive")
    if not scale > 0:
        raise KernelPDEError("scale must be positive")
    epsrel = max(tol, _MIN_EPSREL)

    total, err, _ = _quad_segment(g, start, start + scale, epsrel, 0.0, limit, weight, wvar)
    mass = abs(total)
    lo, width = start + scale, scale
    quiet = 0
    for k in range(max_doublings):
        if weight is None and k == tail_after and quiet == 0:
            val, e, clean = _quad_segment(g, lo, np.inf, epsrel, max(0.1 * tol * mass, atol), limit)
            if clean and math.isfinite(val):
                total += val
                err += e
                mass += abs(val)
                break
            # QAGI flagged a problem (e.g. divergence); keep doubling instead
        hi = lo + width
        val, e, _ = _quad_segment(g, lo, hi, epsrel, max(0.1 * tol * mass, atol), limit, weight, wvar)
        total += val
        err += e
        mass += abs(val)
        if abs(val) <= tol * abs(total) or abs(val) <= atol or (mass == 0.0):
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
        lo, width = hi, 2.0 * width
    else:
        raise QuadratureError("tail did not decay within the refinement budget", total, err)
    if err > max(10.0 * tol * mass, atol) and err > 1e-300:
        raise QuadratureError("requested tolerance not reached", total, err)
    return float(total)


@dataclass(frozen=True)
class DecayHint:
    """Tail descriptor for a Fourier profile.

    ``kind`` is ``'gaussian'`` (``exp(-rate s^2)``), ``'exponential'``
    (``exp(-rate s)``) or ``'algebraic'`` (``s**-rate``).
    """

    kind: str
    rate: float

    def __post_init__(self):
        if self.kind not in ("gaussian", "exponential", "algebraic"):
            raise KernelPDEError(f"unknown decay kind {self.kind!r}")
        if not self.rate > 0:
            raise KernelPDEError("decay rate must be positive")

    @property
    def scale(self) -> float:
        """Length of the first quadrature segment."""
        if self.kind == "gaussian":
            return 4.0 / math.sqrt(self.rate)
        if self.kind == "exponential":
            return 20.0 / self.rate
        return 1.0

    def extend(self, s_end: float, v_end: float, s):
        """Extrapolate beyond the last tabulated abscissa ``s_end``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "gaussian":
            return v_end * np.exp(-self.rate * (s * s - s_end * s_end))
        if self.kind == "exponential":
            return v_end * np.exp(-self.rate * (s - s_end))
        return v_end * (s / s_end) ** (-self.rate)

    @classmethod
    def parse(cls, text: str) -> "DecayHint":
        """Parse ``'kind:rate'``, e.g. ``'gaussian:1'``."""
        kind, _, rate = text.partition(":")
        try:
            return cls(kind.strip(), float(rate) if rate else 1.0)
        except ValueError:
            raise KernelPDEError(f"malformed decay hint {text!r}") from None


@dataclass(frozen=True)
class RadialKernel:
    """Radial kernel on R^n given by its Fourier profile.

    Profiles are vectorized callables of ``s >= 0`` (resp. ``r >= 0``).
    ``interpolation_error`` is nonzero only for tabulated kernels and bounds
    the absolute error of the interpolated Fourier profile.
    ``green_terms = (diffusions, coefficients)`` marks a finite Green-function
    sum, whose inner products with the Green basis are then exact.
    """

    n: int
    fourier_profile: Callable
    physical_profile: Optional[Callable] = None
    decay_hint: Optional[DecayHint] = None
    name: str = "kernel"
    interpolation_error: float = 0.0
    value_scale: float = 1.0
    green_terms: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise KernelPDEError(f"dimension must be a positive integer, got {self.n!r}")

    @property
    def interpolation_rtol(self) -> float:
        """Interpolation error relative to the profile magnitude; quadratures
        involving this kernel are never asked to be tighter than this."""
        return self.interpolation_error / self.value_scale if self.interpolation_error else 0.0

    @property
    def quad_scale(self) -> float:
        return self.decay_hint.scale if self.decay_hint else 1.0

    def fourier(self, s):
        return np.asarray(self.fourier_profile(s), dtype=float)

    def physical(self, r, tol: float = 1e-10):
        """Physical profile; falls back to a numerical inverse transform."""
        if self.physical_profile is not None:
            return np.asarray(self.physical_profile(r), dtype=float)
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        tol = max(tol, self.interpolation_rtol)
        vals = [
            radial_fourier_transform(self.fourier_profile, self.n, x, tol, scale=self.quad_scale)
            / (2.0 * math.pi) ** self.n
            for x in r_arr.ravel()
        ]
        out = np.array(vals).reshape(r_arr.shape)
        return out if np.ndim(r) else float(out[0])


def radial_fourier_transform(
    profile: Callable, n: int, s: float, tol: float = 1e-10, *, scale: float = 1.0
) -> float:
    """n-dimensional Fourier transform of a radial function at ``|xi| = s``.

    Uses ``(2 pi)^{n/2} s^{1-n/2} int_0^inf J_{n/2-1}(s r) f(r) r^{n/2} dr``;
    for ``n = 1, 3`` the Bessel function reduces to cosine/sine and the
    oscillatory part is handled by QAWO. The origin is never sampled.
    """
    if s < 0:
        raise KernelPDEError("frequency must be nonnegative")
    f = lambda r: float(profile(r))  # noqa: E731
    if s == 0:
        omega = sphere_area(n)
        return omega * radial_quadrature(lambda r: r ** (n - 1) * f(r), tol, scale=scale)
    period = math.pi / s
    head = min(scale, period)
    if n == 1:
        g, weight = f, "cos"
        pref = 2.0
        g_head = lambda r: math.cos(s * r) * f(r)  # noqa: E731
    elif n == 3:
        g, weight = (lambda r: r * f(r)), "sin"
        pref = 4.0 * math.pi / s
        g_head = lambda r: math.sin(s * r) * r * f(r)  # noqa: E731
    else:
        nu = n / 2.0 - 1.0
        weight = None
        pref = (2.0 * math.pi) ** (n / 2.0) * s ** (1.0 - n / 2.0)
        g = lambda r: special.jv(nu, s * r) * f(r) * r ** (n / 2.0)  # noqa: E731
        g_head = g
    first, _, _ = _quad_segment(g_head, 0.0, head, max(tol, _MIN_EPSREL), 0.0, 400)
    rest = radial_quadrature(
        g, tol, scale=max(scale, period), start=head, limit=2000, weight=weight, wvar=s
    )
    return pref * (first + rest)


def _check_m(m: int) -> int:
    if int(m) != m or m < 0:
        raise KernelPDEError(f"Sobolev index must be a nonnegative integer, got {m!r}")
    return int(m)


def hm_inner(K1: RadialKernel, K2: RadialKernel, m: int = 0, tol: Optional[float] = None) -> float:
    """Radial ``H^m`` inner product of two kernels (radial convention)."""
    if K1.n != K2.n:
        raise KernelPDEError(f"dimension mismatch: {K1.n} vs {K2.n}")
    m = _check_m(m)
    n = K1.n
    tol = max(default_quad_tol() if tol is None else tol, K1.interpolation_rtol, K2.interpolation_rtol)

    def integrand(s):
        return s ** (n - 1) * (1.0 + s * s) ** m * float(K1.fourier_profile(s)) * float(
            K2.fourier_profile(s)
        )

    return radial_quadrature(integrand, tol, scale=max(K1.quad_scale, K2.quad_scale))


def hm_norm(K: RadialKernel, m: int = 0, tol: Optional[float] = None) -> float:
    """Radial ``H^m`` norm; the square root of :func:`hm_inner` with itself."""
    return math.sqrt(max(hm_inner(K, K, m, tol), 0.0))


def standard_l2_factor(n: int) -> float:
    """Factor turning a radial-convention squared norm into the standard one."""
    return sphere_area(n) / (2.0 * math.pi) ** n


def gaussian_kernel(n: int) -> RadialKernel:
    """``K(r) = exp(-r^2/4)`` with ``Khat(s) = (4 pi)^{n/2} exp(-s^2)``."""
    amp = (4.0 * math.pi) ** (n / 2.0)
    return RadialKernel(
        n=n,
        fourier_profile=lambda s: amp * np.exp(-np.square(s)),
        physical_profile=lambda r: np.exp(-np.square(r) / 4.0),
        decay_hint=DecayHint("gaussian", 1.0),
        name="gaussian",
    )


def green_kernel(n: int, d: float) -> RadialKernel:
    """The Green function ``k(.; d)`` as a kernel."""
    params = GreenParams(n, d)
    return RadialKernel(
        n=n,
        fourier_profile=lambda s: 1.0 / (1.0 + d * np.square(s)),
        physical_profile=(lambda r: green_eval(params, r)) if n <= 3 else None,
        decay_hint=DecayHint("algebraic", 2.0),
        name=f"green(d={d:g})",
    )


def green_sum_kernel(n: int, diffusions, coefficients) -> RadialKernel:
    """Kernel ``sum_j c_j k(.; d_j)``."""
    d = np.asarray(list(diffusions), dtype=float)
    c = np.asarray(list(coefficients), dtype=float)
    if d.shape != c.shape:
        raise KernelPDEError("diffusions and coefficients differ in length")
    params = [GreenParams(n, float(x)) for x in d]

    def fourier(s):
        s2 = np.square(np.asarray(s, dtype=float))
        return np.tensordot(c, 1.0 / (1.0 + np.multiply.outer(d, s2)), axes=1)

    def physical(r):
        return sum(cj * green_eval(p, r) for cj, p in zip(c, params))

    return RadialKernel(
        n=n,
        fourier_profile=fourier,
        physical_profile=physical if n <= 3 else None,
        decay_hint=DecayHint("algebraic", 2.0),
        name="green-sum",
        green_terms=(tuple(float(x) for x in d), tuple(float(x) for x in c)),
    )


def zero_kernel(n: int) -> RadialKernel:
    return RadialKernel(
        n=n,
        fourier_profile=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        physical_profile=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        name="zero",
    )


def _pchip_error_estimate(s: np.ndarray, v: np.ndarray) -> float:
    # Interpolate from every other node and compare at the dropped ones.
    # PCHIP converges at second order on smooth data, so the full table's
    # error is about a quarter of that; dividing by 2 keeps a safety factor.
    if len(s) < 7:
        return float("inf")
    coarse = PchipInterpolator(s[::2], v[::2])
    dropped = slice(1, len(s) - 1, 2)
    return float(np.max(np.abs(coarse(s[dropped]) - v[dropped]))) / 2.0


def tabulated_kernel(
    n: int, s, values, decay_hint: Optional[DecayHint] = None, name: str = "tabulated"
) -> RadialKernel:
    """Kernel from samples of its Fourier profile.

    Monotone cubic (PCHIP) interpolation inside the table; beyond the last
    abscissa the profile follows ``decay_hint`` (zero if no hint is given);
    below the first abscissa it is held constant.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
        raise KernelPDEError("tabulated kernel needs two equal-length 1-D columns")
    if np.any(np.diff(s) <= 0) or s[0] < 0:
        raise KernelPDEError("abscissae must be nonnegative and strictly increasing")
    if not np.all(np.isfinite(v)):
        raise KernelPDEError("tabulated values must be finite")
    interp = PchipInterpolator(s, v, extrapolate=False)
    s_end, v_end = float(s[-1]), float(v[-1])

    def fourier(x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, s[0], s_end)
        out = np.asarray(interp(inside), dtype=float)
        if decay_hint is None:
            tail = np.zeros_like(x)
        else:
            with np.errstate(over="ignore", under="ignore"):
                tail = decay_hint.extend(s_end, v_end, np.maximum(x, s_end))
        return np.where(x > s_end, tail, out)

    return RadialKernel(
        n=n,
        fourier_profile=fourier,
        decay_hint=decay_hint,
        name=name,
        interpolation_error=_pchip_error_estimate(s, v),
        value_scale=float(np.max(np.abs(v))) or 1.0,
    )


def load_tabulated_kernel(path, n: int, decay_hint: Optional[DecayHint] = None) -> RadialKernel:
    """Read a two-column ``s Khat(s)`` text file; ``#`` starts a comment."""
    path = Path(path)
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise KernelPDEError(f"cannot read tabulated kernel {path}: {exc}") from exc
    if data.shape[1] != 2:
        raise KernelPDEError(f"{path}: expected 2 columns, found {data.shape[1]}")
    return tabulated_kernel(n, data[:, 0], data[:, 1], decay_hint, name=path.name)

"""Least-squares fitting of radial kernels by sums of Green functions.

The optimal coefficients of ``K_N = sum_j alpha_j k(.; d_j)`` solve the
normal equations ``A alpha = b`` with ``a_jl = <k_j, k_l>`` and
``b_l = <K, k_l>``. For ``m = 0`` and ``n <= 3`` the Gram entries have
closed forms; ``A`` is Cauchy-like and becomes extremely ill-conditioned as
``N`` grows (condition numbers near 1e17 already for ten constants in
[0.04, 2]). The solver therefore factors in extended precision and reports
a condition estimate with every fit.

For ``m > 0`` or ``n >= 4`` the raw Green functions leave the fitting
space, and :func:`fit_hm` works in the regularized basis
``phi_j = w * k_{J+j}`` with ``what(s) = prod_{l<=J} 1/(1 + d_l s^2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np

from .errors import (
    DuplicateDiffusionError,
    KernelPDEError,
    QuadratureError,
    SingularGramError,
    UnsupportedBasisError,
    UnsupportedDimensionError,
)
from .radial_kernel import (
    RadialKernel,
    _check_m,
    green_kernel,
    hm_inner,
    radial_quadrature,
)
from .special_fn import GreenParams, green_eval

logger = logging.getLogger(__name__)

__all__ = [
    "DiffusionSet",
    "GramSystem",
    "KernelApproximation",
    "PhiBasis",
    "gram_entry",
    "gram_matrix",
    "gram_entry_quadrature",
    "assemble",
    "solve_coefficients",
    "residual_energy",
    "cauchy_solve",
    "phi_coefficients",
    "required_depth",
    "fit",
    "fit_hm",
]

LD = np.longdouble
PI_LD = LD("3.14159265358979323846264338327950288")
DISTINCT_RTOL = 1e-12
ILL_CONDITIONED = 1e12
GAMMA_WARN = 1e14
# Precision (decimal digits) used when the native factorization breaks down
# or when longdouble would leave fewer than ~9 correct digits (cond * 1e-19).
ESCALATED_DPS = 60
ESCALATE_COND = 1e10
_N2_SERIES_GAP = 1e-8


@dataclass(frozen=True)
class DiffusionSet:
    """Ordered, pairwise distinct, positive diffusion constants."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise KernelPDEError("a DiffusionSet needs at least one constant")
        for v in vals:
            if not (v > 0 and math.isfinite(v)):
                raise KernelPDEError(f"diffusion constants must be positive and finite, got {v!r}")
        ordered = sorted(vals)
        for a, b in zip(ordered, ordered[1:]):
            if b - a < DISTINCT_RTOL * b:
                raise DuplicateDiffusionError(
                    f"diffusion constants {a!r} and {b!r} coincide within relative {DISTINCT_RTOL}"
                )
        object.__setattr__(self, "values", vals)

    @classmethod
    def one_plus_sin(cls, count: int) -> "DiffusionSet":
        """``d_j = 1 + sin(j - 1)`` for ``j = 1..count``."""
        if count < 1:
            raise KernelPDEError("count must be at least 1")
        return cls(tuple(1.0 + math.sin(j - 1) for j in range(1, count + 1)))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, idx):
        return self.values[idx]

    def head(self, k: int) -> "DiffusionSet":
        return DiffusionSet(self.values[:k])

    def extended(self, d: float) -> "DiffusionSet":
        return DiffusionSet(self.values + (float(d),))

    def as_array(self, dtype=float) -> np.ndarray:
        return np.array(self.values, dtype=dtype)


# ---------------------------------------------------------------- Gram entries


def _gram_closed(n, dj, dl, sqrt, log1p, pi):
    """Closed-form ``<k_j, k_l>`` for generic numeric types."""
    if n == 1:
        return pi / (2 * (sqrt(dj) + sqrt(dl)))
    if n == 3:
        return pi / (2 * sqrt(dj * dl) * (sqrt(dj) + sqrt(dl)))
    if n == 2:
        t = (dl - dj) / dj
        if abs(t) < _N2_SERIES_GAP:
            # log(1+t)/t expanded; continuous with the general branch
            return (1 - t / 2 + t * t / 3) / (2 * dj)
        return log1p(t) / (2 * (dl - dj))
    raise UnsupportedDimensionError(
        f"closed-form Gram entries exist only for n in {{1, 2, 3}} (got n={n}); "
        "use gram_entry_quadrature"
    )


def gram_entry(n: int, d_j: float, d_l: float) -> float:
    """``<k(.; d_j), k(.; d_l)>`` in the radial L^2 convention, closed form."""
    if not (d_j > 0 and d_l > 0):
        raise KernelPDEError("diffusion constants must be positive")
    val = _gram_closed(n, LD(d_j), LD(d_l), np.sqrt, np.log1p, PI_LD)
    return float(val)


def gram_matrix(n: int, ds: DiffusionSet, dtype=LD) -> np.ndarray:
    """Full closed-form Gram matrix in ``dtype`` (default longdouble)."""
    d = ds.as_array(dtype)
    pi = PI_LD if dtype == LD else dtype(math.pi)
    N = len(d)
    A = np.empty((N, N), dtype=dtype)
    for j in range(N):
        for l in range(j, N):
            A[j, l] = A[l, j] = _gram_closed(n, d[j], d[l], np.sqrt, np.log1p, pi)
    return A


def _gram_matrix_mp(n: int, ds: DiffusionSet) -> list:
    d = [mpmath.mpf(v) for v in ds]
    N = len(d)
    return [
        [_gram_closed(n, d[j], d[l], mpmath.sqrt, mpmath.log1p, mpmath.pi) for l in range(N)]
        for j in range(N)
    ]


def gram_entry_quadrature(
    n: int,
    m: int,
    fhat_j: Callable,
    fhat_l: Callable,
    tol: float = 1e-10,
    scale: float = 1.0,
) -> float:
    """Radial ``H^m`` inner product of two Fourier profiles by quadrature."""
    m = _check_m(m)

    def integrand(s):
        return s ** (n - 1) * (1.0 + s * s) ** m * float(fhat_j(s)) * float(fhat_l(s))

    return radial_quadrature(integrand, tol, scale=scale)


# ------------------------------------------------------------ systems & results


@dataclass
class GramSystem:
    """Normal equations ``A alpha = b`` of one fitting problem.

    ``basis(s, dtype)`` maps frequencies ``s`` (1-D array) to the
    ``(N, len(s))`` table of basis Fourier profiles; together with ``kernel`` it lets the solver
    measure the achieved residual directly. ``scale`` is the constant that
    multiplies the radial inner product (1 for the plain convention).
    """

    n: int
    m: int
    A: np.ndarray
    b: np.ndarray
    k_norm_sq: float
    diffusions: Optional[DiffusionSet] = None
    kernel: Optional[RadialKernel] = None
    basis: Optional[Callable] = None
    scale: float = 1.0
    closed_form: bool = False

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=LD)
        self.b = np.asarray(self.b, dtype=LD)
        N = self.A.shape[0]
        if self.A.shape != (N, N) or self.b.shape != (N,):
            raise KernelPDEError("Gram matrix must be square and match the right-hand side")
        if not np.array_equal(self.A, self.A.T):
            raise KernelPDEError("Gram matrix must be symmetric")

    @property
    def N(self) -> int:
        return self.A.shape[0]


@dataclass
class KernelApproximation:
    """Fitted expansion ``K_N = sum_j alpha_j k(.; d_j)``.

    ``residual_sq`` is the squared fitting-norm distance between the kernel
    and this expansion, measured by quadrature of the residual profile.
    The normal-equation identity value ``k_norm_sq - alpha.b`` is kept in
    ``diagnostics['residual_sq_normal']``.
    """

    n: int
    diffusions: DiffusionSet
    alpha: np.ndarray
    residual_sq: float
    condition_estimate: float
    m: int = 0
    ill_conditioned: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.alpha.shape != (len(self.diffusions),):
            raise KernelPDEError("coefficient count does not match the diffusion set")

    @property
    def N(self) -> int:
        return len(self.alpha)

    def fourier(self, s):
        s2 = np.square(np.asarray(s, dtype=float))
        d = self.diffusions.as_array()
        return np.tensordot(self.alpha, 1.0 / (1.0 + np.multiply.outer(d, s2)), axes=1)

    def physical(self, r):
        """``K_N(r)``; singular at ``r = 0`` for ``n = 2, 3``."""
        if self.n > 3:
            raise UnsupportedDimensionError("pointwise K_N is available for n <= 3 only")
        r = np.asarray(r, dtype=float)
        with np.errstate(invalid="ignore"):
            out = sum(a * green_eval(GreenParams(self.n, d), r) for a, d in zip(self.alpha, self.diffusions))
        return out

    def as_kernel(self) -> RadialKernel:
        from .radial_kernel import green_sum_kernel

        return green_sum_kernel(self.n, self.diffusions, self.alpha)


# ---------------------------------------------------------------- linear algebra


def _cholesky(A, zero, sqrt):
    """Lower Cholesky factor of a symmetric matrix given as nested sequences."""
    N = len(A)
    L = [[zero] * N for _ in range(N)]
    for j in range(N):
        s = A[j][j] - sum((L[j][k] * L[j][k] for k in range(j)), zero)
        if not s > 0:
            raise SingularGramError(j + 1, float(s))
        L[j][j] = sqrt(s)
        for i in range(j + 1, N):
            L[i][j] = (A[i][j] - sum((L[i][k] * L[j][k] for k in range(j)), zero)) / L[j][j]
    return L


def _chol_solve(L, b, zero):
    N = len(b)
    y = [zero] * N
    for i in range(N):
        y[i] = (b[i] - sum((L[i][k] * y[k] for k in range(i)), zero)) / L[i][i]
    x = [zero] * N
    for i in reversed(range(N)):
        x[i] = (y[i] - sum((L[k][i] * x[k] for k in range(i + 1, N)), zero)) / L[i][i]
    return x


def _matvec(A, x, zero):
    return [sum((a * v for a, v in zip(row, x)), zero) for row in A]


def _solve_native(A: np.ndarray, b: np.ndarray, refine_steps: int):
    zero = LD(0)
    Al = A.tolist()
    L = _cholesky(Al, zero, np.sqrt)
    x = _chol_solve(L, list(b), zero)
    for _ in range(refine_steps):
        r = [bi - ai for bi, ai in zip(b, _matvec(Al, x, zero))]
        dx = _chol_solve(L, r, zero)
        x = [xi + di for xi, di in zip(x, dx)]
    diag = [L[i][i] for i in range(len(L))]
    return np.array(x, dtype=LD), np.array(diag, dtype=LD)


def _solve_mp(A, b, refine_steps: int):
    zero = mpmath.mpf(0)
    L = _cholesky(A, zero, mpmath.sqrt)
    x = _chol_solve(L, b, zero)
    for _ in range(refine_steps):
        r = [bi - ai for bi, ai in zip(b, _matvec(A, x, zero))]
        dx = _chol_solve(L, r, zero)
        x = [xi + di for xi, di in zip(x, dx)]
    return x, [L[i][i] for i in range(len(L))]


def _achieved_residual(sys: GramSystem, alpha: np.ndarray, tol: float = 1e-9) -> Optional[float]:
    if sys.kernel is None or sys.basis is None:
        return None
    n, m = sys.n, sys.m
    # Large coefficients cancel; evaluating the expansion in longdouble keeps
    # the integrand noise well below the residual itself.
    alpha = np.asarray(np.asarray(alpha, dtype=float), dtype=LD)
    K = sys.kernel

    def integrand(s):
        approx = np.dot(alpha, sys.basis(np.array([s], dtype=LD), LD)[:, 0])
        diff = float(LD(float(K.fourier_profile(s))) - approx)
        return s ** (n - 1) * (1.0 + s * s) ** m * diff * diff

    # a residual at round-off level cannot meet a relative tolerance, so the
    # error is also allowed to be negligible against |K|^2
    atol = 1e-15 * abs(sys.k_norm_sq) / sys.scale
    tol = max(tol, K.interpolation_rtol)
    return sys.scale * radial_quadrature(integrand, tol, scale=K.quad_scale, atol=atol)


def _summarize(sys: GramSystem, alpha_ld: np.ndarray, diag) -> dict:
    diag = np.asarray(diag, dtype=float)
    cond = float((diag.max() / diag.min()) ** 2) if len(diag) else float("nan")
    alpha_ld = np.asarray(alpha_ld, dtype=LD)
    raw = float(LD(sys.k_norm_sq) - np.dot(alpha_ld, sys.b))
    gradient = 2.0 * (sys.A @ alpha_ld - sys.b)
    source = "quadrature"
    try:
        achieved = _achieved_residual(sys, alpha_ld.astype(float))
    except QuadratureError as exc:
        logger.warning("residual quadrature failed (%s); using the normal-equation value", exc)
        achieved = None
    if achieved is None:
        source = "normal_equations"
        achieved = raw if raw >= 0 else 0.0
    if cond > ILL_CONDITIONED:
        logger.warning("Gram condition estimate %.3g exceeds %.0e", cond, ILL_CONDITIONED)
    return {
        "residual_sq": float(achieved),
        "condition_estimate": cond,
        "ill_conditioned": cond > ILL_CONDITIONED,
        "residual_sq_normal": raw,
        "residual_source": source,
        "gradient_max": float(np.max(np.abs(gradient))),
    }


def _solve(sys: GramSystem, refine_steps: int = 1, precision: str = "auto"):
    """Return ``(alpha, cholesky_diagonal, precision_label)``."""
    if precision not in ("auto", "native"):
        raise KernelPDEError(f"precision must be 'auto' or 'native', got {precision!r}")
    can_escalate = precision == "auto" and sys.closed_form and sys.diffusions is not None
    try:
        alpha, diag = _solve_native(sys.A, sys.b, refine_steps)
    except SingularGramError as exc:
        if not can_escalate:
            raise
        logger.info("native Cholesky broke down at pivot %d; escalating precision", exc.index)
    else:
        cond = float((diag.max() / diag.min()) ** 2)
        if not (can_escalate and cond > ESCALATE_COND):
            return alpha, diag, "longdouble"
        logger.info("condition estimate %.3g beyond longdouble reach; escalating precision", cond)
    with mpmath.workdps(ESCALATED_DPS):
        A = _gram_matrix_mp(sys.n, sys.diffusions)
        c = mpmath.mpf(sys.scale)
        A = [[c * a for a in row] for row in A]
        K = sys.kernel
        if K is not None and K.green_terms is not None:
            e = [mpmath.mpf(v) for v in K.green_terms[0]]
            w = [mpmath.mpf(v) for v in K.green_terms[1]]
            b = [
                c * mpmath.fsum(
                    wl * _gram_closed(sys.n, mpmath.mpf(d), el, mpmath.sqrt, mpmath.log1p, mpmath.pi)
                    for wl, el in zip(w, e)
                )
                for d in sys.diffusions
            ]
        else:
            # keep the full longdouble right-hand side (head plus tail)
            b = [mpmath.mpf(float(v)) + mpmath.mpf(float(v - LD(float(v)))) for v in sys.b]
        x, diag = _solve_mp(A, b, refine_steps)
        alpha = np.array([LD(mpmath.nstr(v, 25)) for v in x], dtype=LD)
        diag = np.array([float(v) for v in diag])
    return alpha, diag, f"mpmath-{ESCALATED_DPS}"


def _approximation(sys: GramSystem, alpha_ld, diag, precision: str) -> KernelApproximation:
    info = _summarize(sys, alpha_ld, diag)
    return KernelApproximation(
        n=sys.n,
        diffusions=sys.diffusions,
        alpha=np.asarray(alpha_ld, dtype=LD).astype(float),
        residual_sq=info.pop("residual_sq"),
        condition_estimate=info.pop("condition_estimate"),
        m=sys.m,
        ill_conditioned=info.pop("ill_conditioned"),
        diagnostics=dict(info, precision=precision),
    )


def solve_coefficients(
    sys: GramSystem, refine_steps: int = 1, precision: str = "auto"
) -> KernelApproximation:
    """Solve the normal equations by Cholesky plus iterative refinement.

    Factorization and refinement run in longdouble, the widest native float.
    With ``precision='auto'`` and closed-form Gram entries, a breakdown or a
    condition estimate above ``ESCALATE_COND`` (where longdouble has no
    correct digits left to refine) triggers a repeat in
    ``ESCALATED_DPS``-digit arithmetic with the entries recomputed there.
    ``precision='native'`` never escalates.

    Raises
    ------
    SingularGramError
        If a non-positive pivot remains; the pivot index is reported.
    """
    if sys.diffusions is None:
        raise KernelPDEError("solve_coefficients needs a system built on a DiffusionSet")
    alpha, diag, label = _solve(sys, refine_steps, precision)
    return _approximation(sys, alpha, diag, label)


def residual_energy(sys: GramSystem, beta: Sequence[float]) -> float:
    """``E(beta) = |K|^2 - 2 beta.b + beta.A.beta`` in longdouble.

    Round-off negatives down to ``-1e-12 |K|^2`` are clamped to zero.
    """
    beta = np.asarray(beta, dtype=LD)
    if beta.shape != (sys.N,):
        raise KernelPDEError(f"expected {sys.N} coefficients, got {beta.shape}")
    val = LD(sys.k_norm_sq) - 2 * np.dot(beta, sys.b) + beta @ (sys.A @ beta)
    val = float(val)
    if val < 0 and val >= -1e-12 * sys.k_norm_sq:
        return 0.0
    return val


def _green_sum_rhs(n: int, ds: DiffusionSet, terms_d, terms_c):
    """Closed-form ``b`` and ``|K|^2`` for ``K = sum_l c_l k(.; e_l)``."""
    e = np.asarray(terms_d, dtype=LD)
    c = np.asarray(terms_c, dtype=LD)

    def row(d):
        return np.array([_gram_closed(n, LD(d), el, np.sqrt, np.log1p, PI_LD) for el in e], dtype=LD)

    b = np.array([np.dot(c, row(d)) for d in ds], dtype=LD)
    kk = float(sum(ci * np.dot(c, row(ei)) for ci, ei in zip(c, e)))
    return b, kk


def assemble(
    K: RadialKernel,
    ds: DiffusionSet,
    m: int = 0,
    *,
    scale: float = 1.0,
    tol: float = 1e-13,
) -> GramSystem:
    """Build the normal equations for the raw Green basis.

    Only ``m = 0`` and ``n <= 3`` are admissible: otherwise the Green
    functions are not in the fitting space and :func:`fit_hm` must be used.
    ``scale`` multiplies every inner product (argmin-invariant).
    """
    m = _check_m(m)
    n = K.n
    if n >= 4:
        raise UnsupportedBasisError(
            f"k(.; d) is not square integrable for n={n}; use the regularized basis (fit_hm)"
        )
    if m > 0:
        raise UnsupportedBasisError(
            f"raw Green basis is not used for m={m}; use the regularized basis (fit_hm)"
        )
    A = LD(scale) * gram_matrix(n, ds)
    if K.green_terms is not None:
        b, kk = _green_sum_rhs(n, ds, *K.green_terms)
        b = LD(scale) * b
        kk = scale * kk
    else:
        b = np.array(
            [LD(scale) * LD(hm_inner(K, green_kernel(n, d), 0, tol)) for d in ds], dtype=LD
        )
        kk = scale * hm_inner(K, K, 0, tol)
    def basis(s, dtype=float):
        s = np.asarray(s, dtype=dtype)
        return 1 / (1 + np.multiply.outer(ds.as_array(dtype), s * s))

    return GramSystem(
        n=n, m=0, A=A, b=b, k_norm_sq=kk, diffusions=ds, kernel=K, basis=basis,
        scale=scale, closed_form=True,
    )


def fit(
    K: RadialKernel,
    ds: DiffusionSet,
    m: int = 0,
    method: str = "cholesky",
    precision: str = "auto",
) -> KernelApproximation:
    """Assemble and solve in one step; ``method`` is 'cholesky' or 'cauchy'."""
    sys = assemble(K, ds, m)
    if method == "cholesky":
        return solve_coefficients(sys, precision=precision)
    if method == "cauchy":
        alpha = cauchy_solve(ds, sys.b, K.n)
        approx = _approximation(sys, alpha, [], f"cauchy-mpmath-{ESCALATED_DPS}")
        return approx
    raise KernelPDEError(f"unknown method {method!r}")


# ------------------------------------------------------------ Cauchy structure


def cauchy_solve(ds: DiffusionSet, b, n: int, dps: int = ESCALATED_DPS) -> np.ndarray:
    """Solve ``A alpha = b`` through the explicit inverse of the Cauchy matrix.

    With nodes ``x_j = sqrt(d_j)`` and ``C_jl = 1/(x_j + x_l)``, the Gram
    matrix is ``(pi/2) C`` for ``n = 1`` and ``(pi/2) D C D`` with
    ``D = diag(d_j^{-1/2})`` for ``n = 3``. The inverse entries are products
    of node differences and are evaluated in ``dps``-digit arithmetic, so
    the result is limited only by the accuracy of ``b``.
    """
    if n not in (1, 3):
        raise UnsupportedDimensionError(f"Cauchy structure holds for n in {{1, 3}}, got n={n}")
    b = [float(v) for v in b]
    if len(b) != len(ds):
        raise KernelPDEError("right-hand side length does not match the diffusion set")
    with mpmath.workdps(dps):
        x = [mpmath.sqrt(mpmath.mpf(v)) for v in ds]
        N = len(x)
        for i in range(N):
            for j in range(i):
                if x[i] == x[j]:
                    raise DuplicateDiffusionError("duplicate Cauchy nodes")
        rhs = [mpmath.mpf(v) for v in b]
        if n == 3:
            rhs = [xi * r for xi, r in zip(x, rhs)]
        # (C^-1)_ij = prod_k (x_i+x_k)(x_j+x_k) / ((x_i+x_j) prod_{k!=i}(x_i-x_k) prod_{k!=j}(x_j-x_k))
        plus = [mpmath.fprod(x[i] + x[k] for k in range(N)) for i in range(N)]
        minus = [mpmath.fprod(x[i] - x[k] for k in range(N) if k != i) for i in range(N)]
        out = []
        for i in range(N):
            acc = mpmath.fsum(
                plus[i] * plus[j] / ((x[i] + x[j]) * minus[i] * minus[j]) * rhs[j]
                for j in range(N)
            )
            val = 2 * acc / mpmath.pi
            if n == 3:
                val *= x[i]
            out.append(LD(mpmath.nstr(val, 25)))
    return np.array(out, dtype=LD)


# ------------------------------------------------------------ regularized basis


def required_depth(m: int, n: int) -> int:
    """Smallest ``J`` with ``4J > 2m + n - 1``."""
    return (2 * m + n - 1) // 4 + 1


def phi_coefficients(J: int, j: int, ds: DiffusionSet) -> np.ndarray:
    """Partial-fraction weights ``(gamma_0, gamma_1, ..., gamma_J)`` of ``phi_j``.

    ``phihat_j(s) = gamma_0/(1 + d_{j+J} s^2) + sum_l gamma_l/(1 + d_l s^2)``
    with ``j`` counted from 1.
    """
    if J < 0 or j < 1 or J + j > len(ds):
        raise KernelPDEError(f"need 0 <= J, 1 <= j and J + j <= {len(ds)} (got J={J}, j={j})")
    base = [LD(v) for v in ds[:J]]
    top = LD(ds[J + j - 1])
    gammas = [np.prod([1 / (1 - dl / top) for dl in base], dtype=LD) if J else LD(1)]
    for l, dl in enumerate(base):
        g = 1 / (1 - top / dl)
        for k, dk in enumerate(base):
            if k != l:
                g *= 1 / (1 - dk / dl)
        gammas.append(g)
    out = np.array(gammas, dtype=LD)
    if np.any(np.abs(out) > GAMMA_WARN):
        logger.warning("phi basis ill-conditioned: |gamma| up to %.3g", float(np.max(np.abs(out))))
    return out


@dataclass(frozen=True)
class PhiBasis:
    """Regularized basis ``phi_1..phi_N0`` built on ``J`` base diffusions."""

    J: int
    diffusions: DiffusionSet
    gammas: np.ndarray  # shape (N0, J + 1), longdouble

    @classmethod
    def build(cls, ds: DiffusionSet, J: int) -> "PhiBasis":
        if len(ds) <= J:
            raise KernelPDEError(f"need more than J={J} diffusion constants, got {len(ds)}")
        gam = np.array([phi_coefficients(J, j, ds) for j in range(1, len(ds) - J + 1)], dtype=LD)
        return cls(J, ds, gam)

    @property
    def N0(self) -> int:
        return len(self.diffusions) - self.J

    @property
    def base_diffusions(self) -> tuple:
        return self.diffusions[: self.J]

    @property
    def tail_diffusions(self) -> tuple:
        return self.diffusions[self.J :]

    @property
    def ill_conditioned(self) -> bool:
        return bool(np.any(np.abs(self.gammas) > GAMMA_WARN))

    def fourier_all(self, s, dtype=float) -> np.ndarray:
        """Product-form profiles, shape ``(N0, len(s))``."""
        s = np.atleast_1d(np.asarray(s, dtype=dtype))
        s2 = s * s
        w = np.ones_like(s2)
        for dl in self.base_diffusions:
            w = w / (1 + dtype(dl) * s2)
        tail = np.array(self.tail_diffusions, dtype=dtype)
        return w / (1 + np.multiply.outer(tail, s2))

    def profile(self, j: int) -> Callable:
        """Fourier profile of ``phi_j`` (1-based) as a scalar/vector callable."""
        base = self.base_diffusions
        top = self.diffusions[self.J + j - 1]

        def phihat(s):
            s2 = np.square(np.asarray(s, dtype=float))
            out = 1.0 / (1.0 + top * s2)
            for dl in base:
                out = out / (1.0 + dl * s2)
            return out

        return phihat

    def expand(self, zeta) -> np.ndarray:
        """Coefficients over ``k_1..k_{J+N0}`` of ``sum_j zeta_j phi_j``."""
        zeta = np.asarray(zeta, dtype=LD)
        if zeta.shape != (self.N0,):
            raise KernelPDEError(f"expected {self.N0} phi coefficients")
        alpha = np.zeros(len(self.diffusions), dtype=LD)
        for j in range(self.N0):
            alpha[self.J + j] += zeta[j] * self.gammas[j, 0]
            alpha[: self.J] += zeta[j] * self.gammas[j, 1:]
        return alpha


def fit_hm(
    K: RadialKernel,
    ds: DiffusionSet,
    m: int = 0,
    *,
    J: Optional[int] = None,
    tol: float = 1e-13,
) -> KernelApproximation:
    """Best ``H^m`` approximation from ``span{phi_1..phi_N0}``.

    The first ``J`` constants (default: smallest admissible depth) are used
    for the regularizing product, the remaining ``N0`` for the basis. The
    projection coincides with the truncated Gram-Schmidt expansion; its
    coefficients are expanded back to ``alpha`` over all ``J + N0`` Green
    functions.
    """
    m = _check_m(m)
    n = K.n
    if J is None:
        J = required_depth(m, n)
    if not 4 * J > 2 * m + n - 1:
        raise KernelPDEError(f"J={J} violates 4J > 2m + n - 1 for m={m}, n={n}")
    if len(ds) < J + 1:
        raise KernelPDEError(f"need at least J + 1 = {J + 1} diffusion constants, got {len(ds)}")
    basis = PhiBasis.build(ds, J)
    profiles = [basis.profile(j) for j in range(1, basis.N0 + 1)]
    scale = K.quad_scale
    G = np.empty((basis.N0, basis.N0), dtype=LD)
    for i in range(basis.N0):
        for j in range(i, basis.N0):
            G[i, j] = G[j, i] = gram_entry_quadrature(n, m, profiles[i], profiles[j], tol, scale)
    ktol = max(tol, K.interpolation_rtol)
    c = np.array(
        [gram_entry_quadrature(n, m, K.fourier_profile, p, ktol, scale) for p in profiles], dtype=LD
    )
    kk = hm_inner(K, K, m, tol)
    sys = GramSystem(n=n, m=m, A=G, b=c, k_norm_sq=kk, kernel=K, basis=basis.fourier_all)
    zeta, diag, precision = _solve(sys)
    info = _summarize(sys, zeta, diag)
    alpha = basis.expand(zeta)
    ill = info.pop("ill_conditioned") or basis.ill_conditioned
    return KernelApproximation(
        n=n,
        diffusions=ds,
        alpha=alpha.astype(float),
        residual_sq=info.pop("residual_sq"),
        condition_estimate=info.pop("condition_estimate"),
        m=m,
        ill_conditioned=ill,
        diagnostics=dict(info, precision=precision, zeta=zeta.astype(float), J=J),
    )

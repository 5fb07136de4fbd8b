"""Radial kernels as sums of screened-Poisson Green functions.

A radial kernel ``K`` on R^n is fitted by ``K_N = sum_j alpha_j k(.; d_j)``,
where ``k(.; d)`` solves ``d Lap(k) - k + delta = 0``. The convolution
``K_N * f`` is then a weighted sum of screened-Poisson solutions.
"""

from .convolution import (
    GridField,
    approximate_convolution,
    convolve_direct,
    error_report,
    read_field,
    screened_poisson_solve,
    spectral_symbol,
    write_field,
)
from .errors import (
    ConfigError,
    DuplicateDiffusionError,
    KernelPDEError,
    QuadratureError,
    SingularGramError,
    UnsupportedBasisError,
    UnsupportedDimensionError,
)
from .fitting import (
    DiffusionSet,
    GramSystem,
    KernelApproximation,
    PhiBasis,
    assemble,
    cauchy_solve,
    fit,
    fit_hm,
    gram_entry,
    gram_entry_quadrature,
    gram_matrix,
    phi_coefficients,
    residual_energy,
    solve_coefficients,
)
from .radial_kernel import (
    DecayHint,
    RadialKernel,
    gaussian_kernel,
    green_kernel,
    green_sum_kernel,
    hm_inner,
    hm_norm,
    load_tabulated_kernel,
    radial_fourier_transform,
    tabulated_kernel,
)
from .special_fn import (
    GreenParams,
    bessel_k,
    green_eval,
    green_fourier,
    green_l2_norm_sq,
    green_profile,
)

__version__ = "0.1.0"

"""Exception types raised across the package."""

from __future__ import annotations


class KernelPDEError(ValueError):
    """Base class for all errors raised by kernelpde."""


class UnsupportedDimensionError(KernelPDEError):
    """The requested operation is not defined for this spatial dimension."""


class UnsupportedBasisError(KernelPDEError):
    """The raw Green basis is not contained in the requested fitting space."""


class DuplicateDiffusionError(KernelPDEError):
    """Two diffusion constants coincide within the distinctness threshold."""


class SingularGramError(KernelPDEError):
    """Cholesky factorization of a Gram matrix met a non-positive pivot."""

    def __init__(self, index: int, pivot: float):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"Gram matrix is numerically singular at pivot {index} "
            f"(value {pivot!r}); diffusion constants may coincide within round-off"
        )


class QuadratureError(KernelPDEError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, error: float):
        self.estimate = estimate
        self.error = error
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error!r})")


class ConfigError(KernelPDEError):
    """A run configuration failed validation."""

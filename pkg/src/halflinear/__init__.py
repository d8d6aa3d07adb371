"""Half-linear oscillation theory and p-Laplacian eigenvalue bounds on radial profiles."""

from .core import (
    DomainError,
    HalfLinearError,
    HalfLinearParams,
    HypothesisError,
    IntegrationError,
    NumericalError,
    ParameterError,
    conjugate_exponent,
    phi,
    phi_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "HalfLinearError",
    "HalfLinearParams",
    "HypothesisError",
    "IntegrationError",
    "NumericalError",
    "ParameterError",
    "conjugate_exponent",
    "phi",
    "phi_inverse",
    "__version__",
]

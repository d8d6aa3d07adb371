"""Exponent bookkeeping and the odd power nonlinearity ``Phi(s) = |s|^(p-2) s``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

P_MIN = 1.0 + 1e-9
P_MAX = 1e6


class HalfLinearError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HalfLinearError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ParameterError(HalfLinearError, ValueError):
    """A numerical control parameter (window, tolerance, grid) is invalid."""


class NumericalError(HalfLinearError, ArithmeticError):
    """A numerical procedure failed to reach its requested accuracy."""


class HypothesisError(HalfLinearError):
    """A hypothesis of a theorem is not (verifiably) satisfied.

    Attributes:
        hypothesis: short human-readable statement of the violated hypothesis.
    """

    def __init__(self, message: str, hypothesis: str):
        super().__init__(message)
        self.hypothesis = hypothesis


def _check_p(p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or not (P_MIN <= p <= P_MAX):
        raise DomainError(f"exponent p must satisfy {P_MIN} <= p <= {P_MAX:g}, got {p!r}")
    return p


def conjugate_exponent(p: float) -> float:
    """Return ``q = p/(p-1)`` so that ``1/p + 1/q = 1``."""
    p = _check_p(p)
    return p / (p - 1.0)


def phi(s: float, p: float) -> float:
    """The odd power ``|s|^(p-2) s``, evaluated as ``sign(s) exp((p-1) log|s|)``."""
    p = _check_p(p)
    if s == 0.0:
        return 0.0
    mag = math.exp((p - 1.0) * math.log(abs(s)))
    return mag if s > 0 else -mag


def phi_inverse(s: float, p: float) -> float:
    """Inverse of :func:`phi`; equal to ``phi(s, q)`` with ``q`` the conjugate exponent."""
    return phi(s, conjugate_exponent(p))


@dataclass(frozen=True)
class HalfLinearParams:
    """Exponent ``p`` (with derived conjugate ``q``) and spectral parameter ``lam``."""

    p: float
    lam: float
    q: float = field(init=False)

    def __post_init__(self):
        p = _check_p(self.p)
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise DomainError(f"spectral parameter must be finite, got {self.lam!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "q", conjugate_exponent(p))

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "lambda": self.lam}


class IntegrationError(NumericalError):
    """Step-size underflow or a non-finite state during ODE integration.

    Attributes:
        time: the last time the integrator reached successfully.
        partial: whatever partial result the caller attached (may be ``None``).
    """

    def __init__(self, message: str, time: float, partial=None):
        super().__init__(message)
        self.time = time
        self.partial = partial


class StateOverflowError(IntegrationError):
    """The integrated state became non-finite."""

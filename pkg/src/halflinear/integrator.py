"""Explicit embedded Runge-Kutta pair of orders 5(4) (Dormand-Prince) with PI step control.

The stepper is driven one accepted step at a time so that callers can
rescale the state, change the right-hand side or stop between steps.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

from .core import IntegrationError, StateOverflowError

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th order weights and the embedded 4th order ones
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA

Rhs = Callable[[float, Sequence[float]], list]


def _finite(vals) -> bool:
    return all(math.isfinite(v) for v in vals)


def dp_step(f: Rhs, t: float, y: Sequence[float], h: float, k1=None):
    """One Dormand-Prince step of size ``h``.

    Returns ``(y_new, err, k7)`` where ``err`` is the embedded error vector
    and ``k7 = f(t + h, y_new)`` (first-same-as-last).
    """
    if k1 is None:
        k1 = f(t, y)
    n = len(y)
    r = range(n)
    k2 = f(t + C2 * h, [y[i] + h * A21 * k1[i] for i in r])
    k3 = f(t + C3 * h, [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in r])
    k4 = f(t + C4 * h, [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in r])
    k5 = f(t + C5 * h, [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in r])
    k6 = f(t + h, [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in r])
    y_new = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in r]
    k7 = f(t + h, y_new)
    err = [h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) for i in r]
    return y_new, err, k7


def advance(f: Rhs, t: float, y: Sequence[float], t_target: float) -> list:
    """Re-integrate from ``(t, y)`` to ``t_target`` with a single step.

    Intended for ``t_target`` inside an interval the adaptive stepper already
    accepted, where a shorter step only has a smaller local error.
    """
    h = t_target - t
    if h == 0.0:
        return list(y)
    y_new, _, _ = dp_step(f, t, y, h)
    return y_new


class DormandPrince:
    """Adaptive stepper; call :meth:`step` until it returns ``False``.

    Attributes exposed to the driver: ``t``, ``y``, ``h`` (next trial step),
    ``accepted``, ``rejected``, ``evals`` and ``last_h`` (size of the last
    accepted step).

    ``limit`` may veto a step the embedded estimate accepted, for right-hand
    sides whose non-smooth points the estimate cannot see.
    """

    def __init__(
        self,
        f: Rhs,
        t0: float,
        y0: Sequence[float],
        t_end: float,
        rtol: float = 1e-9,
        atol: float = 1e-12,
        h0: float = 1e-4,
        hmax: float = math.inf,
        limit: Callable | None = None,
    ):
        if not (rtol > 0 and atol > 0 and h0 > 0 and hmax > 0):
            raise ValueError("tolerances and step sizes must be positive")
        self.f = f
        self.t = float(t0)
        self.y = [float(v) for v in y0]
        self.t_end = float(t_end)
        self.rtol = rtol
        self.atol = atol
        self.hmax = hmax
        # optional veto: limit(t, y, y_new, h) returns a smaller admissible step or None
        self.limit = limit
        self.h = min(h0, hmax, abs(self.t_end - self.t))
        self.k1 = None
        self.err_old = 1e-4
        self.accepted = 0
        self.rejected = 0
        self.evals = 0
        self.last_h = 0.0

    def reset(self, y: Sequence[float], f: Rhs | None = None) -> None:
        """Replace the state (and optionally the right-hand side) between steps."""
        self.y = [float(v) for v in y]
        if f is not None:
            self.f = f
        self.k1 = None

    @property
    def done(self) -> bool:
        return self.t >= self.t_end

    def step(self) -> bool:
        if self.done:
            return False
        reject_streak = False
        while True:
            h = min(self.h, self.hmax)
            last = False
            if self.t + h >= self.t_end or self.t + 1.01 * h >= self.t_end:
                h = self.t_end - self.t
                last = True
            if h <= 16.0 * math.ulp(max(abs(self.t), 1.0)):
                raise IntegrationError(f"step size underflow at t={self.t:.17g}", self.t)
            if self.k1 is None:
                self.k1 = self.f(self.t, self.y)
                self.evals += 1
                if not _finite(self.k1):
                    raise StateOverflowError(f"non-finite derivative at t={self.t:.17g}", self.t)
            try:
                y_new, err, k7 = dp_step(self.f, self.t, self.y, h, self.k1)
                ok = _finite(y_new) and _finite(k7) and _finite(err)
            except (OverflowError, ZeroDivisionError, ValueError):
                ok = False
            self.evals += 6
            if ok:
                s = 0.0
                for yi, yn, ei in zip(self.y, y_new, err):
                    sc = self.atol + self.rtol * max(abs(yi), abs(yn))
                    s += (ei / sc) ** 2
                en = math.sqrt(s / len(err))
            else:
                en = math.inf
            if en <= 1.0 and self.limit is not None:
                h_ok = self.limit(self.t, self.y, y_new, h)
                if h_ok is not None and h_ok < h:
                    self.rejected += 1
                    reject_streak = True
                    self.h = h_ok
                    continue
            if en <= 1.0:
                en = max(en, 1e-10)
                fac = SAFETY * en ** (-ALPHA) * self.err_old**BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
                if reject_streak:
                    fac = min(fac, 1.0)
                self.err_old = en
                self.t = self.t_end if last else self.t + h
                self.y = y_new
                self.k1 = k7
                self.last_h = h
                self.h = h * fac
                self.accepted += 1
                return True
            self.rejected += 1
            reject_streak = True
            if math.isinf(en):
                self.h = 0.25 * h
                if self.h <= 16.0 * math.ulp(max(abs(self.t), 1.0)):
                    raise StateOverflowError(f"non-finite state near t={self.t:.17g}", self.t)
            else:
                self.h = h * max(FAC_MIN, SAFETY * en ** (-0.2))

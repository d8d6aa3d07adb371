"""Adaptive Simpson quadrature, a log-domain wrapper for overflowing integrands,
and composite Simpson on uniform panels."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import NumericalError, ParameterError

ATOL = 1e-10
RTOL = 1e-9
MAX_DEPTH = 60
MAX_EVALS = 2_000_000


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    atol: float = ATOL,
    rtol: float = RTOL,
    max_depth: int = MAX_DEPTH,
    max_evals: int = MAX_EVALS,
) -> tuple[float, float]:
    """Integrate ``f`` over ``[a, b]`` by recursive interval halving.

    The acceptance test on each subinterval is the classical
    ``|S_left + S_right - S_whole| < 15 tol``, with ``tol`` halved per level and
    the Richardson correction added to the accepted value.  The global
    tolerance is ``max(atol, rtol * |I|)`` where ``|I|`` comes from a coarse
    16-panel pre-estimate.

    Returns:
        ``(value, error_estimate)``.

    Raises:
        NumericalError: if the evaluation budget runs out, or a maximal-depth
            subinterval still misses its tolerance; the message carries the
            achieved error estimate.
    """
    if a == b:
        return 0.0, 0.0
    if b < a:
        val, err = adaptive_simpson(f, b, a, atol, rtol, max_depth, max_evals)
        return -val, err

    # coarse pass: 16 Simpson panels, which also seeds the work stack
    n0 = 16
    xs = [a + (b - a) * i / (2 * n0) for i in range(2 * n0 + 1)]
    xs[-1] = b
    fs = [f(x) for x in xs]
    evals = len(fs)
    panels = []
    coarse = 0.0
    for i in range(n0):
        x0, xm, x1 = xs[2 * i], xs[2 * i + 1], xs[2 * i + 2]
        f0, fm, f1 = fs[2 * i], fs[2 * i + 1], fs[2 * i + 2]
        s = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1)
        coarse += s
        panels.append((x0, x1, f0, fm, f1, s, 1))
    if not math.isfinite(coarse):
        raise NumericalError(f"non-finite integrand on [{a}, {b}]")
    tol = max(atol, rtol * abs(coarse))

    total = 0.0
    err_total = 0.0
    unresolved = 0.0
    stack = [(x0, x1, f0, fm, f1, s, d, tol / n0) for (x0, x1, f0, fm, f1, s, d) in panels]
    while stack:
        x0, x1, f0, fm, f1, s, depth, loc_tol = stack.pop()
        xm = 0.5 * (x0 + x1)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x1)
        fl = f(xl)
        fr = f(xr)
        evals += 2
        sl = (xm - x0) / 6.0 * (f0 + 4.0 * fl + fm)
        sr = (x1 - xm) / 6.0 * (fm + 4.0 * fr + f1)
        delta = sl + sr - s
        if abs(delta) <= 15.0 * loc_tol or depth >= max_depth:
            if abs(delta) > 15.0 * loc_tol:
                unresolved += abs(delta) / 15.0
            total += sl + sr + delta / 15.0
            err_total += abs(delta) / 15.0
            continue
        if evals > max_evals:
            raise NumericalError(
                f"adaptive Simpson exhausted {max_evals} evaluations on [{a}, {b}]; "
                f"achieved error estimate {err_total + abs(delta):.3e}"
            )
        stack.append((xm, x1, fm, fr, f1, sr, depth + 1, 0.5 * loc_tol))
        stack.append((x0, xm, f0, fl, fm, sl, depth + 1, 0.5 * loc_tol))
    if not math.isfinite(total):
        raise NumericalError(f"non-finite quadrature result on [{a}, {b}]")
    if unresolved > tol:
        raise NumericalError(
            f"adaptive Simpson reached depth {max_depth} without convergence on [{a}, {b}]; "
            f"achieved error estimate {err_total:.3e}"
        )
    return total, err_total


def log_add(a: float, b: float) -> float:
    """``log(exp(a) + exp(b))`` without overflow."""
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log1p(math.exp(-abs(a - b)))


def log_integral(
    log_f: Callable[[float], float],
    a: float,
    b: float,
    chunk: float = 4.0,
    atol: float = ATOL,
    rtol: float = RTOL,
) -> float:
    """``log of the integral of exp(log_f)`` over ``[a, b]`` for positive integrands.

    The interval is cut into pieces of length at most ``chunk``; each piece is
    integrated after shifting ``log_f`` by its largest endpoint/midpoint value,
    and the pieces are accumulated with log-sum-exp.
    """
    if b < a:
        raise ParameterError("log_integral needs a <= b")
    if a == b:
        return -math.inf
    n = max(1, math.ceil((b - a) / chunk))
    out = -math.inf
    for i in range(n):
        lo = a + (b - a) * i / n
        hi = b if i == n - 1 else a + (b - a) * (i + 1) / n
        shift = max(log_f(lo), log_f(0.5 * (lo + hi)), log_f(hi))
        if shift == -math.inf:
            continue

        def g(s, _shift=shift):
            return math.exp(log_f(s) - _shift)

        val, _ = adaptive_simpson(g, lo, hi, atol=atol * 1e-3, rtol=rtol)
        if val > 0:
            out = log_add(out, shift + math.log(val))
    return out


def composite_simpson(values: np.ndarray, a: float, b: float) -> float:
    """Composite Simpson rule for samples on a uniform grid with an even number of intervals."""
    values = np.asarray(values, dtype=float)
    n = len(values) - 1
    if n < 2 or n % 2:
        raise ParameterError("composite Simpson needs an even number (>= 2) of intervals")
    h = (b - a) / n
    return float(h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum()))

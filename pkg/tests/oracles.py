"""Independent oracles used to derive (and re-derive) frozen expected values.

Nothing here imports the package under test.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from numba import njit
from scipy import integrate, special


@njit(cache=True)
def _rk4_first_zeros(p, lam, x0, u0, t_end, h, n_zeros):
    # constant coefficient system in (x, u = Phi(x')):  x' = Phi^{-1}(u), u' = -lam Phi(x)
    q = p / (p - 1.0)
    out = np.full(n_zeros, np.nan)
    found = 0
    t = 0.0
    x = x0
    u = u0
    n = int(t_end / h)
    for _ in range(n):
        k1x = math.copysign(abs(u) ** (q - 1.0), u)
        k1u = -lam * math.copysign(abs(x) ** (p - 1.0), x)
        xa = x + 0.5 * h * k1x
        ua = u + 0.5 * h * k1u
        k2x = math.copysign(abs(ua) ** (q - 1.0), ua)
        k2u = -lam * math.copysign(abs(xa) ** (p - 1.0), xa)
        xb = x + 0.5 * h * k2x
        ub = u + 0.5 * h * k2u
        k3x = math.copysign(abs(ub) ** (q - 1.0), ub)
        k3u = -lam * math.copysign(abs(xb) ** (p - 1.0), xb)
        xc = x + h * k3x
        uc = u + h * k3u
        k4x = math.copysign(abs(uc) ** (q - 1.0), uc)
        k4u = -lam * math.copysign(abs(xc) ** (p - 1.0), xc)
        xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        un = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        if x != 0.0 and (xn == 0.0 or (xn > 0) != (x > 0)):
            # linear interpolation inside a 1e-6 step
            out[found] = t + h * x / (x - xn)
            found += 1
            if found == n_zeros:
                break
        x, u, t = xn, un, t + h
    return out


def fixed_step_zeros(p, lam, t_end, n_zeros, h=1e-6):
    """First zeros of the canonical solution (x(0)=0, x'(0)=1) for v = 1, fixed-step RK4."""
    return _rk4_first_zeros(float(p), float(lam), 0.0, 1.0, float(t_end), float(h), int(n_zeros))


def half_period_quadrature(p, lam):
    """Zero spacing for v = 1 from the first integral (p-1)|x'|^p + lam |x|^p = const.

    Half period = 2 (p-1)^{1/p} lam^{-1/p} * int_0^1 (1 - s^p)^{-1/p} ds and
    the integral is B(1/p, 1 - 1/p) / p.
    """
    return 2.0 * ((p - 1.0) / lam) ** (1.0 / p) * special.beta(1.0 / p, 1.0 - 1.0 / p) / p


def pi_p(p):
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def phi_mp(s, p):
    mpmath.mp.dps = 50
    s = mpmath.mpf(s)
    return float(abs(s) ** (mpmath.mpf(p) - 2) * s)


def quad(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


def quad_inf(f, a=0.0):
    val, _ = integrate.quad(f, a, np.inf, epsabs=1e-14, epsrel=1e-13, limit=500)
    return val


def log_slope_closed_form(logV, lo, hi, n=64):
    """Least-squares slope of an mpmath-evaluated log V on [lo, hi]."""
    t = np.linspace(lo, hi, n)
    y = np.array([float(logV(mpmath.mpf(float(x)))) for x in t])
    return float(np.polyfit(t, y, 1)[0])

"""Radial area profiles ``v(t)``, cumulative volumes ``V(t)`` and their growth exponent.

A profile is the only geometric input the rest of the package needs: for a
model manifold ``v(r)`` is the area of the geodesic sphere of radius ``r``.
Every profile carries ``log_v`` so that long horizons on exponentially
growing profiles never have to form ``v`` itself.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import DomainError, HypothesisError, NumericalError, ParameterError
from .quadrature import adaptive_simpson, log_add, log_integral

KINDS = ("constant", "power", "exponential", "model_manifold", "tabulated")

# chunk length for piecewise quadrature of V over long spans
_V_CHUNK = 64.0
_LOG_V_SWITCH = math.log(1e300)


class UnsupportedGeometryError(DomainError):
    """Raised for model spaces outside the infinite-volume setting."""


@dataclass(frozen=True, eq=False)
class VolumeProfile:
    """A positive coefficient ``v(t)`` on ``[t0, t_end]`` (``t_end`` may be infinite).

    ``v`` may vanish at ``t0`` itself (the area of a sphere of radius zero)
    but is positive on the open interval.
    """

    kind: str
    params: dict
    t0: float
    log_v: Callable[[float], float] = field(repr=False)
    closed_form_V: Optional[Callable[[float], float]] = field(default=None, repr=False)
    analytic_theta: Optional[float] = None
    t_end: float = math.inf
    source: Optional[str] = None

    def __post_init__(self):
        if not (math.isfinite(self.t0) and self.t0 >= 0):
            raise DomainError(f"profile start t0 must be finite and >= 0, got {self.t0!r}")
        hi = min(self.t0 + 10.0, self.t_end)
        for t in np.linspace(self.t0, hi, 101)[1:]:
            lv = self.log_v(float(t))
            if not lv > -math.inf or math.isnan(lv):
                raise DomainError(f"profile {self.kind} is not positive at t={t:g}")

    def v(self, t: float) -> float:
        lv = self.log_v(t)
        if lv > 709.0:
            return math.inf
        return math.exp(lv)

    def check_domain(self, t: float) -> None:
        if t < self.t0 - 1e-12 or t > self.t_end + 1e-12:
            raise DomainError(f"t={t:g} outside profile domain [{self.t0:g}, {self.t_end:g}]")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": dict(self.params), "t0": self.t0}
        return d


@dataclass(frozen=True)
class GrowthReport:
    theta_estimate: float
    fit_window: tuple[float, float]
    residual: float
    analytic: Optional[float] = None

    @property
    def theta(self) -> float:
        """The exact exponent when the profile kind knows it, else the fitted slope."""
        return self.analytic if self.analytic is not None else self.theta_estimate

    def to_dict(self) -> dict:
        return {
            "theta_estimate": self.theta_estimate,
            "fit_window": list(self.fit_window),
            "residual": self.residual,
            "analytic": self.analytic,
        }


# --------------------------------------------------------------------------- #
# constructors


def _log_sinh(x: float) -> float:
    if x <= 0:
        return -math.inf
    if x < 20.0:
        return math.log(math.sinh(x))
    return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x))


def sphere_area(n: int) -> float:
    """Area of the unit ``(n-1)``-sphere in ``R^n``: ``2 pi^(n/2) / Gamma(n/2)``."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def constant_profile(value: float = 1.0, t0: float = 0.0) -> VolumeProfile:
    if not value > 0:
        raise DomainError("constant profile needs a positive value")
    lv = math.log(value)
    return VolumeProfile(
        kind="constant",
        params={"value": value},
        t0=t0,
        log_v=lambda t: lv,
        closed_form_V=lambda t: value * (t - t0),
        analytic_theta=0.0,
    )


def power_profile(A: float = 1.0, c: float = 1.0, t0: float = 0.0) -> VolumeProfile:
    """``v(t) = A t^c``."""
    if not A > 0:
        raise DomainError("power profile needs A > 0")
    if t0 == 0.0 and c < 0:
        raise DomainError("power profile with c < 0 needs t0 > 0")
    logA = math.log(A)

    def log_v(t):
        if t <= 0.0:
            return -math.inf if c > 0 else (logA if c == 0 else math.inf)
        return logA + c * math.log(t)

    if c == -1.0:
        def V(t):
            return A * math.log(t / t0)
    else:
        def V(t):
            return A * (t ** (c + 1.0) - t0 ** (c + 1.0)) / (c + 1.0)

    return VolumeProfile(
        kind="power", params={"A": A, "c": c}, t0=t0, log_v=log_v, closed_form_V=V, analytic_theta=0.0
    )


def exponential_profile(A: float = 1.0, c: float = 1.0, t0: float = 0.0) -> VolumeProfile:
    """``v(t) = A e^(c t)``."""
    if not A > 0:
        raise DomainError("exponential profile needs A > 0")
    logA = math.log(A)
    if c == 0.0:
        def V(t):
            return A * (t - t0)
    else:
        def V(t):
            return A * math.expm1(c * (t - t0)) * math.exp(c * t0) / c
    return VolumeProfile(
        kind="exponential",
        params={"A": A, "c": c},
        t0=t0,
        log_v=lambda t: logA + c * t,
        closed_form_V=V,
        analytic_theta=max(c, 0.0),
    )


def model_manifold_profile(n: int, kappa: float, t0: float = 0.0) -> VolumeProfile:
    """Sphere-area profile of the simply connected ``n``-dimensional space form of curvature ``kappa``.

    ``v(r) = omega_{n-1} f(r)^(n-1)`` with ``f(r) = r`` for ``kappa = 0`` and
    ``f(r) = sinh(sqrt(-kappa) r)/sqrt(-kappa)`` for ``kappa < 0``.

    Raises:
        UnsupportedGeometryError: for ``kappa > 0`` (compact spheres have finite volume).
    """
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n!r}")
    n = int(n)
    kappa = float(kappa)
    if kappa > 0:
        raise UnsupportedGeometryError(
            "positive curvature gives a compact sphere; the eigenvalue bounds need "
            "an open manifold with infinite volume"
        )
    omega = sphere_area(n)
    log_omega = math.log(omega)
    m = n - 1
    if kappa == 0.0:
        def log_v(r):
            return log_omega + m * math.log(r) if r > 0 else -math.inf

        def F(r):
            return omega * r**n / n

        theta = 0.0
    else:
        k = math.sqrt(-kappa)
        logk = math.log(k)

        def log_v(r):
            return log_omega + m * (_log_sinh(k * r) - logk)

        # antiderivatives of omega * (sinh(k r)/k)^(n-1), vanishing at r = 0
        if n == 2:
            def F(r):
                return omega * (math.cosh(k * r) - 1.0) / k**2
        elif n == 3:
            def F(r):
                x = k * r
                return omega * (math.sinh(x) * math.cosh(x) - x) / (2.0 * k**3)
        elif n == 4:
            def F(r):
                ch = math.cosh(k * r)
                return omega * (ch**3 / 3.0 - ch + 2.0 / 3.0) / k**4
        else:
            F = None
        theta = m * k

    if F is None:
        V = None
    else:
        F0 = F(t0)

        def V(t):
            try:
                return F(t) - F0
            except OverflowError:
                return math.inf

    return VolumeProfile(
        kind="model_manifold",
        params={"n": n, "kappa": kappa},
        t0=t0,
        log_v=log_v,
        closed_form_V=V,
        analytic_theta=theta,
    )


def tabulated_profile(t, v, t0: Optional[float] = None, source: Optional[str] = None) -> VolumeProfile:
    """Profile interpolating a table with a monotone (PCHIP) cubic.

    The table must be strictly increasing in ``t`` and strictly positive in ``v``.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
        raise DomainError("tabulated profile needs matching 1-D t and v arrays of length >= 2")
    if not np.all(np.diff(t) > 0):
        raise DomainError("tabulated t values must be strictly increasing")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise DomainError("tabulated profile contains non-positive or non-finite values")
    interp = PchipInterpolator(t, v, extrapolate=False)
    lo, hi = float(t[0]), float(t[-1])
    start = lo if t0 is None else float(t0)
    if start < lo:
        raise DomainError("t0 lies before the first table entry")

    def log_v(s):
        if s < lo - 1e-12 or s > hi + 1e-12:
            raise DomainError(f"t={s:g} outside tabulated range [{lo:g}, {hi:g}]")
        val = float(interp(min(max(s, lo), hi)))
        return math.log(val) if val > 0 else -math.inf

    params = {"source": source} if source else {"t": t.tolist(), "v": v.tolist()}
    return VolumeProfile(
        kind="tabulated", params=params, t0=start, log_v=log_v, t_end=hi, source=source
    )


def read_table_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``t,v`` CSV table."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "v"]:
            raise DomainError(f"{path}: expected CSV header 't,v'")
        for i, row in enumerate(reader, start=2):
            try:
                ts.append(float(row["t"]))
                vs.append(float(row["v"]))
            except (TypeError, ValueError) as exc:
                raise DomainError(f"{path}:{i}: malformed row ({exc})") from None
    return np.array(ts), np.array(vs)


def profile_from_dict(spec: dict, base_dir: Optional[Path] = None) -> VolumeProfile:
    """Build a profile from ``{"kind": ..., "params": {...}, "t0": number}``."""
    kind = spec.get("kind")
    params = dict(spec.get("params", {}))
    t0 = spec.get("t0")
    if kind == "constant":
        return constant_profile(float(params.get("value", 1.0)), t0=float(t0 or 0.0))
    if kind == "power":
        return power_profile(float(params.get("A", 1.0)), float(params.get("c", 1.0)), t0=float(t0 or 0.0))
    if kind == "exponential":
        return exponential_profile(float(params.get("A", 1.0)), float(params.get("c", 1.0)), t0=float(t0 or 0.0))
    if kind == "model_manifold":
        if "n" not in params or "kappa" not in params:
            raise DomainError("model_manifold needs params n and kappa")
        return model_manifold_profile(int(params["n"]), float(params["kappa"]), t0=float(t0 or 0.0))
    if kind == "tabulated":
        if "source" in params or "csv" in params:
            path = Path(params.get("source") or params["csv"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            t, v = read_table_csv(path)
            return tabulated_profile(t, v, t0=t0, source=str(params.get("source") or params["csv"]))
        return tabulated_profile(params["t"], params["v"], t0=t0)
    raise DomainError(f"unknown profile kind {kind!r}; expected one of {KINDS}")


def load_profile(path) -> VolumeProfile:
    """Load a profile definition from a JSON file or a ``t,v`` CSV table."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        t, v = read_table_csv(path)
        return tabulated_profile(t, v, source=str(path))
    with open(path) as fh:
        spec = json.load(fh)
    return profile_from_dict(spec, base_dir=path.parent)


# --------------------------------------------------------------------------- #
# volumes and growth


def cumulative_volume(profile: VolumeProfile, t: float) -> float:
    """``V(t) = integral of v over [t0, t]``; closed form when known, adaptive Simpson otherwise.

    Returns ``inf`` when the volume overflows double precision.
    """
    profile.check_domain(t)
    if t <= profile.t0:
        return 0.0
    if profile.closed_form_V is not None:
        return profile.closed_form_V(t)
    total = 0.0
    a = profile.t0
    while a < t:
        b = min(t, a + _V_CHUNK)
        val, _ = adaptive_simpson(profile.v, a, b)
        total += val
        a = b
    return total


def log_cumulative_volume(profile: VolumeProfile, t: float) -> float:
    """``log V(t)``, switching to log-sum-exp accumulation once ``V`` exceeds 1e300."""
    profile.check_domain(t)
    if t <= profile.t0:
        return -math.inf
    if profile.closed_form_V is not None:
        try:
            V = profile.closed_form_V(t)
        except OverflowError:
            V = math.inf
        if 0 < V < 1e300:
            return math.log(V)
        if profile.kind == "exponential" and profile.params["c"] > 0:
            A, c = profile.params["A"], profile.params["c"]
            return math.log(A / c) + c * t + math.log(-math.expm1(c * (profile.t0 - t)))
    elif profile.log_v(t) < _LOG_V_SWITCH - 10.0:
        V = cumulative_volume(profile, t)
        if 0 < V < 1e300:
            return math.log(V)
    return log_integral(profile.log_v, profile.t0, t)


def _log_volume_grid(profile: VolumeProfile, grid: np.ndarray) -> np.ndarray:
    out = np.empty(len(grid))
    out[0] = log_cumulative_volume(profile, float(grid[0]))
    for i in range(1, len(grid)):
        if profile.closed_form_V is not None:
            try:
                V = profile.closed_form_V(float(grid[i]))
            except OverflowError:
                V = math.inf
            if 0 < V < 1e300:
                out[i] = math.log(V)
                continue
        inc = log_integral(profile.log_v, float(grid[i - 1]), float(grid[i]))
        out[i] = log_add(out[i - 1], inc)
    return out


def growth_exponent(profile: VolumeProfile, t_max: float, n_points: int = 64) -> GrowthReport:
    """Least-squares slope of ``log V(t)`` against ``t`` on the tail window ``[t_max/2, t_max]``.

    The analytic exponent is attached for the kinds that know it; the
    estimate is always computed.
    """
    if not t_max > profile.t0 + 1.0:
        raise ParameterError(f"t_max must exceed t0 + 1 = {profile.t0 + 1.0:g}")
    profile.check_domain(t_max)
    lo = max(0.5 * t_max, 0.5 * (profile.t0 + t_max))
    if t_max - lo < 1.0:
        raise ParameterError(f"fit window [{lo:g}, {t_max:g}] is shorter than 1")
    n_points = max(int(n_points), 64)
    grid = np.linspace(lo, t_max, n_points)
    logV = _log_volume_grid(profile, grid)
    if not np.all(np.isfinite(logV)):
        raise NumericalError("log V(t) is not finite on the fit window")
    coef, res, *_ = np.polyfit(grid, logV, 1, full=True)
    residual = float(res[0]) if len(res) else 0.0
    return GrowthReport(
        theta_estimate=float(coef[0]),
        fit_window=(float(lo), float(t_max)),
        residual=residual,
        analytic=profile.analytic_theta,
    )


def doubling_increments(log_f: Callable[[float], float], t_hi: float, t_lo: float, doublings: int) -> list[float]:
    """Log-integrals of ``exp(log_f)`` over ``[t_hi/2^(j+1), t_hi/2^j]``, ordered left to right."""
    edges = [t_hi / 2.0**j for j in range(doublings, -1, -1)]
    if edges[0] <= t_lo:
        raise ParameterError(
            f"horizon {t_hi:g} too short for {doublings} doublings above t0={t_lo:g}"
        )
    return [log_integral(log_f, a, b) for a, b in zip(edges[:-1], edges[1:])]


def volume_diverges(profile: VolumeProfile, t_max: float, doublings: int = 6) -> bool:
    """Numerical test of ``V(t) -> infinity``.

    ``V`` is sampled at ``t_ref * 2^k`` for ``k = 0..doublings`` with
    ``t_ref = t_max / 2^doublings``.  The volume is declared convergent when
    the doubling increments of the last three intervals shrink, i.e. the
    ratio of consecutive increments drops below one (a plateau of ``V``).
    """
    if profile.closed_form_V is not None and profile.kind in ("constant", "power", "exponential", "model_manifold"):
        if profile.kind == "power":
            return profile.params["c"] >= -1.0
        if profile.kind == "exponential":
            return profile.params["c"] >= 0.0
        return True
    lo = max(profile.t0, 0.0)
    t_max = min(t_max, profile.t_end)
    incs = doubling_increments(profile.log_v, t_max, lo, doublings)
    ratios = [b - a for a, b in zip(incs[:-1], incs[1:])]
    last = ratios[-2:]
    return all(r >= math.log(1.0 - 1e-6) for r in last)


def require_infinite_volume(profile: VolumeProfile, t_max: float) -> None:
    """Raise :class:`HypothesisError` unless the volume is numerically divergent."""
    if not volume_diverges(profile, t_max):
        raise HypothesisError(
            f"profile {profile.kind} has (numerically) finite volume: the hypothesis "
            "'infinite volume, integral of v to infinity = +infinity' fails",
            hypothesis="infinite volume",
        )


# --------------------------------------------------------------------------- #
# asymptotically nonnegative radial Ricci curvature


def _moment_integral(k: Callable[[float], float], tail_rtol: float = 1e-10, max_doublings: int = 120) -> float:
    """``b0 = integral_0^inf s k(s) ds`` over dyadic segments with geometric tail control."""
    def g(s):
        return s * k(s)

    total, _ = adaptive_simpson(g, 0.0, 1.0)
    prev = total
    nondecreasing = 0
    a = 1.0
    for _ in range(max_doublings):
        inc, _ = adaptive_simpson(g, a, 2.0 * a)
        total += inc
        a *= 2.0
        if inc == 0.0 and prev == 0.0:
            return total
        if prev > 0 and inc >= prev * (1.0 - 1e-12):
            nondecreasing += 1
            if nondecreasing >= 3:
                break
            prev = inc
            continue
        nondecreasing = 0
        ratio = inc / prev if prev > 0 else 0.0
        tail = inc * ratio / (1.0 - ratio) if ratio < 1 else math.inf
        prev = inc
        if tail <= tail_rtol * abs(total):
            return total
    raise NumericalError(
        "moment integral of s k(s) does not converge: b_0(k) = infinity, volume bound unavailable"
    )


@dataclass(frozen=True, eq=False)
class RicciDecayProfile:
    """Decay function ``k`` for the radial Ricci lower bound ``Ric >= -(n-1) k(dist)``."""

    k: Callable[[float], float] = field(repr=False)
    n: int
    b0: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("dimension must be an integer >= 2")
        s = np.concatenate([np.linspace(0.0, 10.0, 101), np.geomspace(10.0, 1e6, 60)])
        ks = np.array([self.k(float(x)) for x in s])
        if np.any(ks < 0) or not np.all(np.isfinite(ks)):
            raise DomainError("decay function k must be finite and nonnegative")
        if np.any(np.diff(ks) > 1e-15 * np.maximum(1.0, ks[:-1])):
            raise DomainError("decay function k must be nonincreasing")
        object.__setattr__(self, "b0", _moment_integral(self.k))


def ricci_volume_bound(decay: RicciDecayProfile, r: float) -> float:
    """Volume bound ``e^(b0) r^n`` for asymptotically nonnegative radial Ricci curvature."""
    if not r > 0:
        raise DomainError("radius must be positive")
    return math.exp(decay.b0) * r**decay.n

"""Rayleigh quotients of annulus test functions and first-eigenvalue upper bounds.

A solution ``x`` at parameter ``lam`` restricted between two consecutive
zeros ``t1 < t2`` is a radial test function on the annulus
``B(t2) - B(t1)``; its Rayleigh quotient

    int v |x'|^p / int v |x|^p

equals ``lam`` (integration by parts), which bounds the first eigenvalue of
every exterior domain containing the annulus.  Shooting on ``lam`` gives the
annulus eigenvalue itself.

The first eigenvalue of a domain is the infimum of the Rayleigh quotient
over compactly supported test functions; only upper witnesses for it are
computed here, never the eigenvalue of the full exterior domain.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import HalfLinearParams, IntegrationError, NumericalError, ParameterError, _check_p
from .criteria import DEFAULT_T_MAX, THETA_ZERO_TOL
from .ode import ATOL, RTOL, Trajectory, _pow_odd, integrate_halflinear, scan_zeros
from .profiles import VolumeProfile, growth_exponent, require_infinite_volume
from .quadrature import composite_simpson

PANELS = 1024

ANNULUS = "annulus_upper_bound"
THETA_BOUND = "theta_bound"
ESSENTIAL = "essential_bound"


@dataclass(frozen=True)
class RayleighResult:
    """Quotient over the annulus ``[t1, t2]``.

    When the trajectory carries log-scales, ``numerator`` and ``denominator``
    are both divided by ``exp(log_scale)``.
    """

    t1: float
    t2: float
    numerator: float
    denominator: float
    quotient: float
    log_scale: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t1": self.t1,
            "t2": self.t2,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "quotient": self.quotient,
            "log_scale": self.log_scale,
        }


@dataclass(frozen=True)
class SpectralBound:
    kind: str
    value: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "value": self.value}
        d.update(self.provenance)
        return d


def rayleigh_quotient(
    trajectory: Trajectory,
    zero_pair: tuple[float, float],
    profile: Optional[VolumeProfile] = None,
    p: Optional[float] = None,
    panels: int = PANELS,
) -> RayleighResult:
    """Rayleigh quotient of the trajectory clipped to a pair of consecutive zeros.

    Numerator ``int w x'`` (``= int v |x'|^p``) and denominator
    ``int v |x|^p`` are composite-Simpson sums over ``panels`` uniform
    Simpson panels, with the integrand resampled by re-integration.

    Raises:
        ParameterError: the pair is not two consecutive zeros of this trajectory.
    """
    tr = trajectory
    profile = profile or tr.profile
    p = tr.params.p if p is None else _check_p(p)
    t1, t2 = float(zero_pair[0]), float(zero_pair[1])
    if not t2 > t1:
        raise ParameterError("zero pair must satisfy t1 < t2")
    if t1 < tr.t[0] or t2 > tr.t[-1]:
        raise ParameterError("zero pair lies outside the trajectory span")
    zeros, _ = scan_zeros(tr)
    if tr.xm[0] == 0.0:
        # a vanishing initial value counts as a zero
        zeros = [float(tr.t[0])] + list(zeros)
    tol = 1e-7 * max(1.0, t2 - t1)
    i1 = next((k for k, z in enumerate(zeros) if abs(z - t1) <= tol), None)
    i2 = next((k for k, z in enumerate(zeros) if abs(z - t2) <= tol), None)
    if i1 is None or i2 is None or i2 != i1 + 1:
        raise ParameterError(f"({t1:g}, {t2:g}) are not consecutive zeros of the trajectory")

    n = 2 * int(panels)
    ts = np.linspace(t1, t2, n + 1)
    qm1 = tr.params.q - 1.0
    _, _, a_ref, s_ref = tr.local_state_at(0.5 * (t1 + t2))
    num = np.empty(n + 1)
    den = np.empty(n + 1)
    for j, tau in enumerate(ts):
        xm, wm, a, s = tr.local_state_at(float(tau))
        lv = profile.log_v(float(tau))
        amp = math.exp(p * (a - a_ref))
        xpm = _pow_odd(wm * math.exp(s - lv), qm1)
        num[j] = wm * xpm * amp * math.exp(s - s_ref)
        den[j] = math.exp(lv - s_ref) * abs(xm) ** p * amp
    N = composite_simpson(num, t1, t2)
    D = composite_simpson(den, t1, t2)
    log_scale = p * a_ref + s_ref
    if log_scale == 0.0:
        return RayleighResult(t1, t2, N, D, N / D, 0.0)
    return RayleighResult(t1, t2, N, D, N / D, log_scale)


def _first_zero_before(profile, p, lam, t1, t2, rtol, atol) -> bool:
    tr = integrate_halflinear(
        HalfLinearParams(p, lam), profile, 0.0, 1.0, (t1, t2), rtol=rtol, atol=atol, stop_after_sign_changes=1
    )
    if tr.status == "stopped":
        return True
    return tr.xm[-1] == 0.0


def annulus_first_eigenvalue(
    profile: VolumeProfile,
    p: float,
    t1: float,
    t2: float,
    rel_tol: float = 1e-8,
    rtol: float = 1e-11,
    atol: float = 1e-14,
) -> float:
    """Smallest ``lam`` whose shot ``x(t1) = 0, x'(t1) = 1`` first vanishes at ``t2``.

    The first zero moves left as ``lam`` grows, so ``lam`` is bracketed from
    ``[1e-8, 1]`` (doubling the upper end) and bisected to ``rel_tol``.

    Raises:
        NumericalError: no zero before ``t2`` for any ``lam <= 1e8``.
    """
    p = _check_p(p)
    if not (profile.t0 <= t1 < t2):
        raise ParameterError("need t0 <= t1 < t2")

    def hit(lam):
        return _first_zero_before(profile, p, lam, t1, t2, rtol, atol)

    lo, hi = 1e-8, 1.0
    while hit(lo):
        lo *= 1e-4
        if lo < 1e-200:
            raise NumericalError("annulus eigenvalue below 1e-200; bracket failure")
    while not hit(hi):
        lo = hi
        hi *= 2.0
        if hi > 1e8:
            raise NumericalError(f"no sign change on ({t1:g}, {t2:g}) for lambda up to 1e8; bracket failure")
    while hi - lo > rel_tol * hi:
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if hit(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def theta_upper_bound(
    profile: VolumeProfile,
    p: float,
    t_max: float = DEFAULT_T_MAX,
    theta_zero_tol: float = THETA_ZERO_TOL,
    kind: str = THETA_BOUND,
) -> SpectralBound:
    """``beta^p / p^p`` with ``beta`` the growth exponent; exactly 0 for subexponential growth.

    Raises:
        HypothesisError: the volume is not verifiably infinite.
    """
    p = _check_p(p)
    require_infinite_volume(profile, t_max)
    g = growth_exponent(profile, t_max)
    beta = g.theta
    if beta <= theta_zero_tol:
        beta = 0.0
    value = 0.0 if beta == 0.0 else (beta / p) ** p
    return SpectralBound(
        kind,
        value,
        {
            "beta": beta,
            "p": p,
            "theta_estimate": g.theta_estimate,
            "theta_analytic": g.analytic,
            "theta_window": list(g.fit_window),
            "source": "theorem2_a" if beta == 0.0 else "theorem2_b",
        },
    )


def essential_bound(profile: VolumeProfile, p: float, t_max: float = DEFAULT_T_MAX, theta_zero_tol: float = THETA_ZERO_TOL) -> SpectralBound:
    """Upper bound ``theta^p / p^p`` for the bottom of the essential p-spectrum."""
    b = theta_upper_bound(profile, p, t_max, theta_zero_tol, kind=ESSENTIAL)
    b.provenance["source"] = "essential_spectrum"
    return b


# --------------------------------------------------------------------------- #
# sweeps


@dataclass
class SweepRow:
    lam: float
    t1: Optional[float]
    t2: Optional[float]
    quotient: Optional[float]
    verdict: str
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "t1": self.t1, "t2": self.t2, "quotient": self.quotient, "verdict": self.verdict, "error": self.error}


@dataclass
class SweepResult:
    rows: list
    threshold: Optional[float]
    threshold_bracket: Optional[tuple]
    p: float
    t_start: float
    horizon: float

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "threshold": self.threshold,
            "threshold_bracket": list(self.threshold_bracket) if self.threshold_bracket else None,
            "p": self.p,
            "t_start": self.t_start,
            "horizon": self.horizon,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["lambda", "t1", "t2", "quotient", "verdict"])
        fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
        for r in self.rows:
            wr.writerow([fmt(r.lam), fmt(r.t1), fmt(r.t2), fmt(r.quotient), r.verdict])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _first_pair(profile, p, lam, t_start, horizon, rtol, atol):
    tr = integrate_halflinear(
        HalfLinearParams(p, lam), profile, 0.0, 1.0, (t_start, horizon), rtol=rtol, atol=atol, stop_after_sign_changes=2
    )
    zeros, _ = scan_zeros(tr)
    return tr, zeros


def has_zero_pair(profile, p, lam, t_start, horizon, rtol=RTOL, atol=ATOL) -> bool:
    try:
        _, zeros = _first_pair(profile, p, lam, t_start, horizon, rtol, atol)
    except IntegrationError:
        return False
    return len(zeros) >= 2


def oscillation_threshold(profile, p, lo, hi, t_start, horizon, tol=1e-3, rtol=RTOL, atol=ATOL):
    """Bisect ``inf{lam : two zeros in (t_start, horizon]}`` inside ``[lo, hi]``.

    ``lo`` must have no zero pair and ``hi`` must have one.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_zero_pair(profile, p, mid, t_start, horizon, rtol, atol):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), (lo, hi)


def bound_witness_sweep(
    profile: VolumeProfile,
    p: float,
    lambda_grid,
    t_start: float,
    horizon: float,
    threshold_tol: float = 1e-3,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> SweepResult:
    """Witness rows ``(lam, t1, t2, quotient)`` plus the empirical oscillation threshold.

    For each ``lam`` the canonical solution is integrated until its second
    zero past ``t_start``; the first pair is the annulus and its Rayleigh
    quotient the witness.  Failures are recorded in-row.
    """
    p = _check_p(p)
    grid = [float(l) for l in lambda_grid]
    if not grid:
        raise ParameterError("lambda grid is empty")
    if any(l <= 0 for l in grid) or any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ParameterError("lambda grid must be positive and strictly increasing")
    rows = []
    for lam in grid:
        try:
            tr, zeros = _first_pair(profile, p, lam, t_start, horizon, rtol, atol)
        except IntegrationError as exc:
            rows.append(SweepRow(lam, None, None, None, "error", str(exc)))
            continue
        if len(zeros) >= 2:
            rq = rayleigh_quotient(tr, (zeros[0], zeros[1]))
            rows.append(SweepRow(lam, zeros[0], zeros[1], rq.quotient, "oscillatory_evidence"))
        else:
            rows.append(SweepRow(lam, None, None, None, "no_zero_found"))
    hits = [r.lam for r in rows if r.t2 is not None]
    misses = [r.lam for r in rows if r.verdict == "no_zero_found"]
    threshold = bracket = None
    if hits:
        hi = min(hits)
        below = [l for l in misses if l < hi]
        lo = max(below) if below else 0.0
        threshold, bracket = oscillation_threshold(profile, p, lo, hi, t_start, horizon, threshold_tol, rtol, atol)
    return SweepResult(rows, threshold, bracket, p, t_start, horizon)

"""Riccati transform ``y = -v Phi(x') / Phi(x)`` of the half-linear equation.

Along positive solutions ``y`` solves

    y' = lam v + (p-1) v^(1-q) |y|^q,

with ``|y|^q`` in place of the formal ``y^q`` (the derivation produces
``(p-1) v |x'/x|^p >= 0``).  Escape to ``+inf`` happens exactly at the next
zero of ``x``.  Close to the escape the integration switches to
``z = y^(1-q)``, which obeys the regular equation

    z' = -(q-1) lam v z^p - v^(1-q)

and crosses zero transversally at the escape time.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import DomainError, HalfLinearParams, ParameterError
from .integrator import DormandPrince, advance
from .ode import RTOL, ATOL, H0, Trajectory, _pow_odd
from .profiles import VolumeProfile

DIRECT = "direct_integration"
SUBSTITUTION = "substitution_from_solution"

BLOW_UP_THRESHOLDS = (1e10, 1e11, 1e12)
# beyond this y the integration continues in z = y^(1-q), which reaches 0
# at the escape time with a nonzero slope
SWITCH = 1e3
# samples above this |y| are left out of residual checks
Y_CAP = 1e6


@dataclass
class BlowUp:
    """Escape of ``y`` to ``+inf``.

    ``time`` is the root of ``z = y^(1-q)``; ``extrapolated`` is the
    Richardson extrapolation of the threshold ``crossing_times`` and serves
    as a cross-check.
    """

    time: float
    threshold_sequence: list
    crossing_times: list
    extrapolated: float

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "direction": "+inf",
            "threshold_sequence": list(self.threshold_sequence),
            "crossing_times": list(self.crossing_times),
            "extrapolated": self.extrapolated,
        }


@dataclass(eq=False)
class RiccatiTrajectory:
    params: HalfLinearParams
    profile: VolumeProfile
    t: np.ndarray
    y: np.ndarray
    origin: str
    blow_up: Optional[BlowUp] = None
    _evaluator: Optional[Callable[[float], float]] = field(default=None, repr=False)

    def __len__(self):
        return len(self.t)

    def value_at(self, tau: float) -> float:
        """``y(tau)``: exact sample when available, otherwise re-integrated."""
        j = int(np.searchsorted(self.t, tau))
        if j < len(self.t) and self.t[j] == tau:
            return float(self.y[j])
        if self._evaluator is None:
            raise DomainError("trajectory cannot be evaluated between samples")
        return self._evaluator(tau)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "y"])
        for ti, yi in zip(self.t, self.y):
            wr.writerow([repr(float(ti)), repr(float(yi))])
        return buf.getvalue()

    def blow_up_json(self) -> str:
        return json.dumps(self.blow_up.to_dict() if self.blow_up else None)


def _y_rhs(params: HalfLinearParams, profile: VolumeProfile):
    lam, pm1, q = params.lam, params.p - 1.0, params.q
    log_v = profile.log_v

    def f(t, y):
        lv = log_v(t)
        return [lam * math.exp(lv) + pm1 * math.exp((1.0 - q) * lv) * abs(y[0]) ** q]

    return f


def _z_rhs(params: HalfLinearParams, profile: VolumeProfile):
    lam, p, q = params.lam, params.p, params.q
    log_v = profile.log_v

    def f(t, z):
        lv = log_v(t)
        return [-(q - 1.0) * lam * math.exp(lv) * _pow_odd(z[0], p) - math.exp((1.0 - q) * lv)]

    return f


def _dense(f, ts, ys, steps, dense):
    """Append ``dense - 1`` re-integrated points inside each accepted step."""
    out_t, out_y = [ts[0]], [ys[0]]
    for (t0, y0), (t1, y1) in zip(zip(ts[:-1], ys[:-1]), zip(ts[1:], ys[1:])):
        for k in range(1, dense):
            tau = t0 + (t1 - t0) * k / dense
            out_t.append(tau)
            out_y.append(advance(f, t0, [y0], tau)[0])
        out_t.append(t1)
        out_y.append(y1)
    return out_t, out_y


def _bisect_level(f, t0, z0, t1, level, tol=1e-15):
    """Time in ``[t0, t1]`` where the decreasing ``z`` crosses ``level``."""
    lo, hi = t0, t1
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if advance(f, t0, [z0], mid)[0] > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _richardson(crossings, thresholds, p):
    """Escape time from the last two threshold crossings.

    Near the escape ``y ~ C (T - t)^(1-p)``, so ``(T - t_3)/(T - t_2)`` equals
    ``rho = (Y_2/Y_3)^(1/(p-1))`` to leading order and ``T`` follows exactly
    for that model.
    """
    t2, t3 = crossings[-2], crossings[-1]
    rho = (thresholds[-2] / thresholds[-1]) ** (1.0 / (p - 1.0))
    if not (t3 > t2 and 1.0 - rho > 1e-3):
        return t3
    return t3 + (t3 - t2) * rho / (1.0 - rho)


def integrate_riccati(
    params: HalfLinearParams,
    profile: VolumeProfile,
    y0: float,
    span: tuple[float, float],
    rtol: float = RTOL,
    atol: float = ATOL,
    dense: int = 8,
) -> RiccatiTrajectory:
    """Integrate the Riccati equation from ``y(t_start) = y0``.

    Above ``y = 1e3`` the equation is integrated for ``z = y^(1-q)``, which
    obeys ``z' = -(q-1)(lam v z^p + v^(1-q))`` and reaches zero with nonzero
    slope.  The crossings of ``y = 1e10, 1e11, 1e12`` are bisected and
    extrapolated; the reported escape time is the bisected root of ``z``,
    which is far better conditioned when the prefactor of the singularity is
    large.  The samples
    are the accepted steps with ``dense - 1`` re-integrated points inside
    each step.
    """
    t_start, t_end = float(span[0]), float(span[1])
    if not t_end > t_start:
        raise ParameterError("span must satisfy t_start < t_end")
    if not math.isfinite(y0):
        raise DomainError("y0 must be finite")
    profile.check_domain(t_start)
    profile.check_domain(t_end)
    if not math.isfinite(profile.log_v(t_start)):
        raise DomainError(f"v({t_start:g}) must be positive")
    fy = _y_rhs(params, profile)
    hmax = (t_end - t_start) / 100.0
    st = DormandPrince(fy, t_start, [y0], t_end, rtol, atol, H0, hmax)
    ts, ys = [t_start], [float(y0)]
    while st.step():
        ts.append(st.t)
        ys.append(st.y[0])
        if st.y[0] >= SWITCH:
            break
    dt, dy = _dense(fy, ts, ys, None, dense)

    def y_eval(tau, _ts=ts, _ys=ys):
        i = max(0, int(np.searchsorted(_ts, tau, side="right")) - 1)
        return advance(fy, _ts[i], [_ys[i]], tau)[0]

    if ys[-1] < SWITCH:
        return RiccatiTrajectory(params, profile, np.array(dt), np.array(dy), DIRECT, None, y_eval)

    # escape phase in z = y^(1-q)
    q = params.q
    fz = _z_rhs(params, profile)
    t_sw = ts[-1]
    z_sw = ys[-1] ** (1.0 - q)
    levels = [Y ** (1.0 - q) for Y in BLOW_UP_THRESHOLDS]
    zt = DormandPrince(fz, t_sw, [z_sw], math.inf, rtol, atol * z_sw, st.last_h or H0, hmax)
    zts, zs = [t_sw], [z_sw]
    crossings: list[float] = []
    z_root = math.nan
    while True:
        t_prev, z_prev = zt.t, zt.y[0]
        zt.step()
        t_new, z_new = zt.t, zt.y[0]
        for lev in levels[len(crossings):]:
            if z_new <= lev:
                crossings.append(_bisect_level(fz, t_prev, z_prev, t_new, lev))
        if z_new <= 0.0:
            z_root = _bisect_level(fz, t_prev, z_prev, t_new, 0.0)
            break
        zts.append(t_new)
        zs.append(z_new)
        if t_new > t_end + 1.0:
            break
    extrapolated = _richardson(crossings, BLOW_UP_THRESHOLDS, params.p) if len(crossings) == 3 else z_root
    blow_time = z_root if math.isfinite(z_root) else extrapolated
    if not blow_time <= t_end:
        # escape beyond the requested span: keep only samples inside it
        keep = [k for k, tk in enumerate(zts) if tk <= t_end]
        zts = [zts[k] for k in keep]
        zs = [zs[k] for k in keep]
        if zts[-1] < t_end:
            zs.append(advance(fz, zts[-1], [zs[-1]], t_end)[0])
            zts.append(t_end)
        blow = None
    else:
        blow = BlowUp(blow_time, list(BLOW_UP_THRESHOLDS), crossings, extrapolated)
    zts_d, zs_d = _dense(fz, zts, zs, None, dense) if len(zts) > 1 else (zts, zs)
    for tk, zk in zip(zts_d[1:], zs_d[1:]):
        if zk > 0 and (blow is None or tk < blow_time):
            dt.append(tk)
            dy.append(zk ** (1.0 / (1.0 - q)))
    if blow is not None:
        for Y, tc in zip(BLOW_UP_THRESHOLDS, crossings):
            if tc > dt[-1]:
                dt.append(tc)
                dy.append(Y)
        if blow_time > dt[-1]:
            dt.append(blow_time)
            dy.append(math.inf)
        else:
            dy[-1] = math.inf

    def yz_eval(tau):
        if tau <= t_sw:
            return y_eval(tau)
        if blow is not None and tau >= blow_time:
            return math.inf
        i = max(0, int(np.searchsorted(zts, tau, side="right")) - 1)
        z = advance(fz, zts[i], [zs[i]], tau)[0]
        return z ** (1.0 / (1.0 - q)) if z > 0 else math.inf

    return RiccatiTrajectory(params, profile, np.array(dt), np.array(dy), DIRECT, blow, yz_eval)


def riccati_from_solution(
    trajectory: Trajectory,
    span: Optional[tuple[float, float]] = None,
    dense: int = 8,
) -> RiccatiTrajectory:
    """``y = -w / Phi(x)`` on a zero-free part of a half-linear trajectory.

    Samples are the trajectory's own steps inside ``span`` plus ``dense - 1``
    re-integrated points per step.

    Raises:
        DomainError: if ``|x|`` drops below ``1e-12 max|x|`` on the span;
            clip the span between consecutive zeros.
    """
    tr = trajectory
    lo, hi = (float(tr.t[0]), float(tr.t[-1])) if span is None else (float(span[0]), float(span[1]))
    if not hi > lo:
        raise ParameterError("span must satisfy lo < hi")
    inner = [float(t) for t in tr.t if lo < t < hi]
    knots = [lo] + inner + [hi]
    times = []
    for a, b in zip(knots[:-1], knots[1:]):
        times.extend(a + (b - a) * k / dense for k in range(dense))
    times.append(hi)
    pm1 = tr.params.p - 1.0
    xs, ys = [], []
    for tau in times:
        xm, wm, a, s = tr.local_state_at(tau)
        xs.append(xm * math.exp(a))
        ys.append((xm, wm, a, s))
    xs = np.array(xs)
    xmax = float(np.max(np.abs(xs)))
    if np.any(np.abs(xs) < 1e-12 * xmax) or np.any(np.diff(np.sign(xs)) != 0):
        raise DomainError("x vanishes on the requested span; clip the span between consecutive zeros")
    y = np.array([-wm * math.exp(s) / _pow_odd(xm, pm1) for (xm, wm, a, s) in ys])

    def y_eval(tau):
        xm, wm, a, s = tr.local_state_at(tau)
        return -wm * math.exp(s) / _pow_odd(xm, pm1)

    return RiccatiTrajectory(tr.params, tr.profile, np.array(times), y, SUBSTITUTION, None, y_eval)


def _deriv_weights(nodes: np.ndarray, x0: float) -> np.ndarray:
    """Weights of the first derivative at ``x0`` of the interpolating polynomial on ``nodes``."""
    n = len(nodes)
    w = np.empty(n)
    for j in range(n):
        others = [nodes[m] for m in range(n) if m != j]
        denom = np.prod([nodes[j] - o for o in others])
        # derivative of prod (x - o) at x0
        total = 0.0
        for k in range(len(others)):
            total += np.prod([x0 - others[m] for m in range(len(others)) if m != k])
        w[j] = total / denom
    return w


def riccati_residual(
    riccati_traj: RiccatiTrajectory,
    profile: Optional[VolumeProfile] = None,
    params: Optional[HalfLinearParams] = None,
    y_cap: float = Y_CAP,
) -> float:
    """Max normalized residual ``|y' - (lam v + (p-1) v^(1-q) |y|^q)| / (1 + |y'|)`` over interior samples.

    ``y'`` is a five-point centred difference.  When the trajectory can be
    evaluated between samples the stencil step is local,
    ``min(gap/4, 0.01 (|y|/|y'| + gap))``, so that steep stretches near an
    escape are resolved; otherwise the (non-uniform) sample grid is used.
    Samples whose stencil touches ``|y| > y_cap`` are skipped.
    """
    profile = profile or riccati_traj.profile
    params = params or riccati_traj.params
    t, y = riccati_traj.t, riccati_traj.y
    if len(t) < 10:
        raise ParameterError("riccati_residual needs at least 10 samples")
    lam, pm1, q = params.lam, params.p - 1.0, params.q
    local = riccati_traj._evaluator is not None
    stencil = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    worst = 0.0
    for i in range(2, len(t) - 2):
        ti, yi = float(t[i]), float(y[i])
        if not (math.isfinite(yi) and abs(yi) <= y_cap):
            continue
        lv = profile.log_v(ti)
        rhs = lam * math.exp(lv) + pm1 * math.exp((1.0 - q) * lv) * abs(yi) ** q
        if local:
            gap = min(float(t[i + 1]) - ti, ti - float(t[i - 1]))
            d = min(0.25 * gap, 0.01 * (abs(yi) / max(abs(rhs), 1e-300) + gap))
            ys = np.array([riccati_traj.value_at(ti + k * d) if k else yi for k in (-2, -1, 0, 1, 2)])
            if not np.all(np.isfinite(ys)) or np.max(np.abs(ys)) > y_cap:
                continue
            dy = float(stencil @ ys) / d
        else:
            sl = slice(i - 2, i + 3)
            ys = y[sl]
            if not np.all(np.isfinite(ys)) or np.max(np.abs(ys)) > y_cap:
                continue
            # offsets from the centre node for conditioning
            dy = float(_deriv_weights(t[sl] - t[i], 0.0) @ ys)
        worst = max(worst, abs(dy - rhs) / (1.0 + abs(dy)))
    return worst


CASE_I = "case_I"
CASE_II = "case_II"
INCONCLUSIVE = "inconclusive"


def case_classification(profile: VolumeProfile, p: float, horizon: float, use_closed_form: bool = True) -> str:
    """Decide whether ``integral^inf v^(1-q)`` converges (case I) or diverges (case II).

    Closed-form kinds are answered analytically.  Otherwise the integral is
    split over the doublings ``[h/16, h/8], ..., [h/2, h]``: geometric decay of
    the increments (every ratio below 0.5) gives case I, non-decreasing
    increments give case II, anything else is inconclusive.
    """
    from .core import conjugate_exponent
    from .profiles import doubling_increments

    q = conjugate_exponent(p)
    if use_closed_form:
        kind, prm = profile.kind, profile.params
        if kind == "constant":
            return CASE_II
        if kind == "power":
            return CASE_I if prm["c"] * (q - 1.0) > 1.0 else CASE_II
        if kind == "exponential":
            return CASE_I if prm["c"] > 0 else CASE_II
        if kind == "model_manifold":
            if prm["kappa"] < 0:
                return CASE_I
            return CASE_I if (prm["n"] - 1) * (q - 1.0) > 1.0 else CASE_II
    horizon = min(horizon, profile.t_end)
    log_f = lambda s: (1.0 - q) * profile.log_v(s)  # noqa: E731
    incs = doubling_increments(log_f, horizon, profile.t0, 4)
    log_ratios = [b - a for a, b in zip(incs[:-1], incs[1:])]
    if all(r < math.log(0.5) or math.isnan(r) for r in log_ratios):
        return CASE_I
    if all(r >= -1e-9 for r in log_ratios):
        return CASE_II
    return INCONCLUSIVE


@dataclass
class GrowthBoundReport:
    T: float
    y_T: float
    n_checked: int
    growth_ok: bool
    young_ok: bool
    min_growth_margin: float
    min_young_margin: float
    violations: list

    @property
    def ok(self) -> bool:
        return self.growth_ok and self.young_ok

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "y_T": self.y_T,
            "n_checked": self.n_checked,
            "growth_ok": self.growth_ok,
            "young_ok": self.young_ok,
            "min_growth_margin": self.min_growth_margin,
            "min_young_margin": self.min_young_margin,
            "violations": self.violations[:20],
        }


def growth_bound_check(riccati_traj: RiccatiTrajectory, params: HalfLinearParams, T: float) -> GrowthBoundReport:
    """Check the exponential lower bound and the Young-inequality step along a Riccati trajectory.

    For every finite sample ``t >= T``:

    * ``y(t) >= y(T) exp(p lam^(1/p) (t - T)) - 1e-8 y(t)``;
    * ``p lam^(1/p) y <= lam v + (p-1) v^(1-q) y^q`` (samples with ``y >= 0``).

    Margins are relative: ``(rhs - lhs) / scale``; negative means violated.
    """
    if not params.lam > 0:
        raise DomainError("growth bound needs lam > 0")
    yT = riccati_traj.value_at(T)
    if not yT > 0:
        raise DomainError(f"growth bound needs y(T) > 0, got y({T:g}) = {yT:g}")
    p, q, lam = params.p, params.q, params.lam
    rate = p * lam ** (1.0 / p)
    profile = riccati_traj.profile
    growth_ok = young_ok = True
    gmin = ymin = math.inf
    violations = []
    n = 0
    for ti, yi in zip(riccati_traj.t, riccati_traj.y):
        ti, yi = float(ti), float(yi)
        if ti < T or not math.isfinite(yi):
            continue
        n += 1
        bound = yT * math.exp(rate * (ti - T))
        g = (yi - bound + 1e-8 * yi) / max(abs(yi), 1e-300)
        gmin = min(gmin, g)
        if g < 0:
            growth_ok = False
            violations.append({"t": ti, "check": "growth", "y": yi, "bound": bound})
        if yi >= 0:
            lv = profile.log_v(ti)
            lhs = rate * yi
            rhs = lam * math.exp(lv) + (p - 1.0) * math.exp((1.0 - q) * lv) * yi**q
            m = (rhs - lhs) / max(rhs, 1e-300)
            ymin = min(ymin, m)
            if m < -1e-12:
                young_ok = False
                violations.append({"t": ti, "check": "young", "lhs": lhs, "rhs": rhs})
    return GrowthBoundReport(T, yT, n, growth_ok, young_ok, gmin, ymin, violations)

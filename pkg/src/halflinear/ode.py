"""The half-linear equation ``(v Phi(x'))' + lam v Phi(x) = 0`` in quasi-derivative form.

The integrated state is ``(x, w)`` with ``w = v Phi(x')``:

    x' = Phi^{-1}(w / v),    w' = -lam v Phi(x).

The equation is homogeneous of degree ``p - 1``, so ``(x, w) -> (c x, c^(p-1) w)``
maps solutions to solutions.  Together with a running shift of ``log v`` this
lets the integrator store every sample as a mantissa plus two log-scales and
follow exponentially growing profiles over horizons where ``v`` itself
overflows.  For unit-size initial data on moderate spans both scales stay at
zero and the stored values are the true ones.
"""

from __future__ import annotations

import bisect
import csv
import functools
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DomainError, HalfLinearParams, IntegrationError, ParameterError
from .integrator import DormandPrince, advance
from .profiles import VolumeProfile

RTOL = 1e-9
ATOL = 1e-12
H0 = 1e-4
ZERO_TOL = 1e-10
# rescale when log v leaves a band of this half-width around the current shift
_REBASE_V = 50.0
# rescale the amplitude when max(|x|, |x'|) leaves [e^-3, e^3]; atol is only
# meaningful while mantissas stay O(1)
_REBASE_X = 3.0

OSCILLATORY = "oscillatory_evidence"
NO_ZERO = "no_zero_found"


class TangentialZeroWarning(UserWarning):
    """``|x|`` dipped to round-off level without changing sign."""


def _pow_odd(s: float, e: float) -> float:
    # |s|^e sign(s); math.copysign keeps the sign of exact zeros harmless
    if s == 0.0:
        return 0.0
    return math.copysign(abs(s) ** e, s)


def make_rhs(params: HalfLinearParams, profile: VolumeProfile, log_v_shift: float):
    """Right-hand side of the scaled system for a fixed shift ``s`` of ``log v``."""
    pm1 = params.p - 1.0
    qm1 = params.q - 1.0
    lam = params.lam
    log_v = profile.log_v

    def rhs(t, y):
        lv = log_v(t) - log_v_shift
        x, w = y
        return [_pow_odd(w * math.exp(-lv), qm1), -lam * math.exp(lv) * _pow_odd(x, pm1)]

    return rhs


@functools.lru_cache(maxsize=64)
def _kink_constant(r: float) -> float:
    """``max_sigma |E(sigma)|`` for the DP5 weights integrating ``Phi_r(u - sigma)`` over ``[0, 1]``.

    ``Phi_r(s) = |s|^(r-2) s``; the quadrature error of one step of size ``h``
    straddling the kink is ``K E(sigma) h^r``.
    """
    from .integrator import B1, B3, B4, B5, B6, C2, C3, C4, C5

    c = np.array([0.0, C2, C3, C4, C5, 1.0])
    b = np.array([B1, 0.0, B3, B4, B5, B6])
    sig = np.linspace(0.0, 1.0, 2001)[:, None]
    d = c[None, :] - sig
    g = np.sign(d) * np.abs(d) ** (r - 1.0)
    exact = ((1.0 - sig[:, 0]) ** r - sig[:, 0] ** r) / r
    return float(np.max(np.abs(g @ b - exact)))


# kinks get a tighter budget than smooth steps: they are few, and the energy
# error they cause is amplified by a factor of order p
_KINK_TOL = 0.01


def _kink_limiter(params: HalfLinearParams, profile: VolumeProfile, rtol: float, atol: float, shift: list):
    """Step veto for steps across the non-smooth points of the vector field.

    ``Phi(x)`` is not smooth where ``x`` changes sign (unless ``p`` is 2 or
    an even integer) and ``Phi^{-1}(w/v)`` is not smooth where ``w`` does.
    A step straddling or touching such a point has an ``O(h^p)`` (resp.
    ``O(h^q)``) error that the embedded estimate does not see, so it is
    bounded explicitly.  ``shift`` is a one-item list holding the current log-v shift.
    """
    p, q, lam = params.p, params.q, abs(params.lam)
    bx = 2.0 * _kink_constant(p)
    bw = 2.0 * _kink_constant(q)
    if bx < 1e-13 and bw < 1e-13:
        return None
    log_v = profile.log_v

    def near(a, b):
        # the linearly extrapolated sign change lies within one step length
        # of the step; steps next to a kink are as inaccurate as steps across it
        if a == 0.0 or b == 0.0 or (a > 0) != (b > 0):
            return True
        d = abs(b - a)
        return min(abs(a), abs(b)) <= d

    def limit(t, y, y_new, h):
        (x0, w0), (x1, w1) = y, y_new
        h_ok = None
        vt = None
        if bx >= 1e-13 and near(x0, x1):
            vt = math.exp(log_v(t + 0.5 * h) - shift[0])
            err = bx * lam * vt * (abs(x1 - x0) / h) ** (p - 1.0) * h**p
            tol = _KINK_TOL * (atol + rtol * max(abs(w0), abs(w1)))
            if err > tol:
                h_ok = 0.9 * h * (tol / err) ** (1.0 / p)
        if bw >= 1e-13 and near(w0, w1):
            if vt is None:
                vt = math.exp(log_v(t + 0.5 * h) - shift[0])
            err = bw * (abs(w1 - w0) / (vt * h)) ** (q - 1.0) * h**q
            tol = _KINK_TOL * (atol + rtol * max(abs(x0), abs(x1)))
            if err > tol:
                hw = 0.9 * h * (tol / err) ** (1.0 / q)
                h_ok = hw if h_ok is None else min(h_ok, hw)
        return h_ok

    return limit


@dataclass(eq=False)
class Trajectory:
    """Sampled solution at the integrator's accepted steps.

    ``xm`` and ``wm`` are mantissas; the true values are
    ``x = xm e^a`` and ``w = wm e^((p-1) a + s)`` with ``a = log_sx`` and
    ``s = log_sv`` per sample.  The scales belong to the step that starts
    at that sample.
    """

    params: HalfLinearParams
    profile: VolumeProfile
    t: np.ndarray
    xm: np.ndarray
    wm: np.ndarray
    log_sx: np.ndarray
    log_sv: np.ndarray
    span: tuple[float, float]
    step_stats: dict
    rtol: float = RTOL
    atol: float = ATOL
    status: str = "completed"
    message: Optional[str] = None
    _rhs_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.t)

    @property
    def scaled(self) -> bool:
        return bool(np.any(self.log_sx != 0) or np.any(self.log_sv != 0))

    @property
    def x(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return self.xm * np.exp(self.log_sx)

    @property
    def w(self) -> np.ndarray:
        with np.errstate(over="ignore", under="ignore"):
            return self.wm * np.exp((self.params.p - 1.0) * self.log_sx + self.log_sv)

    @property
    def xprime(self) -> np.ndarray:
        qm1 = self.params.q - 1.0
        out = np.empty(len(self.t))
        for i, (ti, wi, a, s) in enumerate(zip(self.t, self.wm, self.log_sx, self.log_sv)):
            u = wi * math.exp(s - self.profile.log_v(float(ti)))
            out[i] = _pow_odd(u, qm1) * math.exp(a)
        return out

    def rhs_for(self, shift: float):
        rhs = self._rhs_cache.get(shift)
        if rhs is None:
            rhs = make_rhs(self.params, self.profile, shift)
            self._rhs_cache[shift] = rhs
        return rhs

    def index_before(self, tau: float) -> int:
        if tau < self.t[0] or tau > self.t[-1]:
            raise DomainError(f"t={tau:g} outside trajectory span [{self.t[0]:g}, {self.t[-1]:g}]")
        i = bisect.bisect_right(self.t, tau) - 1
        return min(max(i, 0), len(self.t) - 2) if len(self.t) > 1 else 0

    def local_state_at(self, tau: float) -> tuple[float, float, float, float]:
        """``(xm, wm, a, s)`` at ``tau`` by one re-integrated step from the preceding sample."""
        i = self.index_before(tau)
        ti = float(self.t[i])
        y0 = [float(self.xm[i]), float(self.wm[i])]
        s = float(self.log_sv[i])
        if tau == ti:
            y = y0
        else:
            y = advance(self.rhs_for(s), ti, y0, tau)
        return y[0], y[1], float(self.log_sx[i]), s

    def state_at(self, tau: float) -> tuple[float, float]:
        """True ``(x, w)`` at ``tau``."""
        xm, wm, a, s = self.local_state_at(tau)
        return xm * math.exp(a), wm * math.exp((self.params.p - 1.0) * a + s)

    def resample(self, times) -> tuple[np.ndarray, np.ndarray]:
        """True ``x`` and ``w`` on arbitrary times inside the span."""
        xs = np.empty(len(times))
        ws = np.empty(len(times))
        for j, tau in enumerate(times):
            xs[j], ws[j] = self.state_at(float(tau))
        return xs, ws

    def to_csv(self, uniform: Optional[int] = None) -> str:
        """``t,x,w`` CSV at native steps, or at ``uniform`` equally spaced times."""
        if uniform:
            ts = np.linspace(self.t[0], self.t[-1], int(uniform))
            xs, ws = self.resample(ts)
        else:
            ts, xs, ws = self.t, self.x, self.w
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "x", "w"])
        for row in zip(ts, xs, ws):
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def integrate_halflinear(
    params: HalfLinearParams,
    profile: VolumeProfile,
    x0: float,
    xprime0: float,
    span: tuple[float, float],
    rtol: float = RTOL,
    atol: float = ATOL,
    h0: float = H0,
    max_step: Optional[float] = None,
    stop_after_sign_changes: Optional[int] = None,
) -> Trajectory:
    """Integrate the half-linear equation from ``x(t0) = x0, x'(t0) = xprime0``.

    Args:
        span: ``(t_start, t_end)`` inside the profile domain.
        max_step: defaults to one hundredth of the span length.
        stop_after_sign_changes: stop at the first accepted step after which
            ``x`` has changed sign this many times (used by threshold scans).

    Raises:
        IntegrationError: step-size underflow or non-finite state; the partial
            trajectory is attached as ``exc.partial``.
    """
    t_start, t_end = float(span[0]), float(span[1])
    if not t_end > t_start:
        raise ParameterError("span must satisfy t_start < t_end")
    profile.check_domain(t_start)
    profile.check_domain(t_end)
    if x0 == 0.0 and xprime0 == 0.0:
        raise DomainError("initial condition (0, 0) gives the trivial solution")
    if not (rtol > 0 and atol > 0):
        raise ParameterError("tolerances must be positive")
    lv0 = profile.log_v(t_start)
    if not math.isfinite(lv0):
        raise DomainError(f"v({t_start:g}) must be positive and finite to start the integration")
    p = params.p
    pm1 = p - 1.0

    s = lv0 if abs(lv0) > _REBASE_V else 0.0
    # the amplitude always starts normalized, so scaled initial data give
    # identical mantissas (exact homogeneity up to rounding)
    mag = max(abs(x0), abs(xprime0))
    a = math.log(mag) if mag != 1.0 else 0.0
    xm = x0 * math.exp(-a)
    # w = v Phi(x') ; in mantissa units wm = e^(lv0 - s) Phi(x'/e^a)
    wm = math.exp(lv0 - s) * _pow_odd(xprime0 * math.exp(-a), pm1)

    rhs_cache: dict = {}

    def rhs_for(shift):
        r = rhs_cache.get(shift)
        if r is None:
            r = make_rhs(params, profile, shift)
            rhs_cache[shift] = r
        return r

    hmax = (t_end - t_start) / 100.0 if max_step is None else max_step
    shift = [s]
    stepper = DormandPrince(
        rhs_for(s), t_start, [xm, wm], t_end, rtol, atol, h0, hmax,
        limit=_kink_limiter(params, profile, rtol, atol, shift),
    )
    ts, xs, ws, sxs, svs = [t_start], [xm], [wm], [a], [s]
    sign_changes = 0
    status, message = "completed", None

    def build(st, msg):
        return Trajectory(
            params=params,
            profile=profile,
            t=np.array(ts),
            xm=np.array(xs),
            wm=np.array(ws),
            log_sx=np.array(sxs),
            log_sv=np.array(svs),
            span=(t_start, float(ts[-1])),
            step_stats={"accepted": stepper.accepted, "rejected": stepper.rejected, "rhs_evals": stepper.evals},
            rtol=rtol,
            atol=atol,
            status=st,
            message=msg,
        )

    try:
        while stepper.step():
            t = stepper.t
            xn, wn = stepper.y
            if xs[-1] != 0.0 and (xn == 0.0 or (xn > 0) != (xs[-1] > 0)):
                sign_changes += 1
            # rebase the log-v shift and the amplitude scale when they drift
            lv = profile.log_v(t)
            new_s = s
            if abs(lv - s) > _REBASE_V and math.isfinite(lv):
                new_s = lv
            mag = max(abs(xn), abs(wn * math.exp(s - lv)) ** (1.0 / pm1) if wn else 0.0)
            new_a = a
            if mag > 0 and abs(math.log(mag)) > _REBASE_X:
                new_a = a + math.log(mag)
            if new_s != s or new_a != a:
                xn = xn * math.exp(a - new_a)
                wn = wn * math.exp(pm1 * (a - new_a) + (s - new_s))
                a, s = new_a, new_s
                shift[0] = s
                stepper.reset([xn, wn], rhs_for(s))
            ts.append(t)
            xs.append(xn)
            ws.append(wn)
            sxs.append(a)
            svs.append(s)
            if stop_after_sign_changes is not None and sign_changes >= stop_after_sign_changes:
                status = "stopped"
                break
    except IntegrationError as exc:
        exc.partial = build("failed", str(exc))
        raise
    return build(status, message)


# --------------------------------------------------------------------------- #
# zeros


def _bisect_zero(traj: Trajectory, i: int, tol: float) -> float:
    ti = float(traj.t[i])
    y0 = [float(traj.xm[i]), float(traj.wm[i])]
    rhs = traj.rhs_for(float(traj.log_sv[i]))
    lo, hi = ti, float(traj.t[i + 1])
    s_lo = y0[0] > 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        xm = advance(rhs, ti, y0, mid)[0]
        if xm == 0.0:
            return mid
        if (xm > 0) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_zeros(traj: Trajectory, tol: float = ZERO_TOL) -> tuple[list[float], list[str]]:
    """Zeros of ``x`` in ``(t_start, t_end]`` plus warnings about tangential near-zeros.

    Every sign change between consecutive samples is refined by bisection,
    evaluating ``x`` by re-integrating from the left sample.
    """
    zeros: list[float] = []
    idx: list[int] = []
    flags: list[str] = []
    xm = traj.xm
    n = len(xm)
    # local reference magnitudes (mantissas are O(1) relative to their scale)
    xref = float(np.max(np.abs(xm))) if n else 0.0
    for i in range(n - 1):
        a, b = xm[i], xm[i + 1]
        if b == 0.0:
            zeros.append(float(traj.t[i + 1]))
            idx.append(i)
        elif a != 0.0 and (a > 0) != (b > 0):
            zeros.append(_bisect_zero(traj, i, tol))
            idx.append(i)
        elif i > 0 and abs(a) < 1e-13 * xref and a != 0.0:
            flags.append(f"tangential near-zero at t={traj.t[i]:.12g} without sign change")
    # simple-zero check: |w| at the zero against max |w| over the
    # half-oscillation ending there, compared in log scale (the span after
    # the last zero may grow without bound)
    if zeros:
        pm1 = traj.params.p - 1.0
        with np.errstate(divide="ignore"):
            logw = np.log(np.abs(traj.wm)) + pm1 * traj.log_sx + traj.log_sv
        bounds = [0] + [i + 1 for i in idx] + [n]
        for j, z in enumerate(zeros):
            ref = float(np.max(logw[bounds[j] : idx[j] + 2]))
            xz, wz, az, sz = traj.local_state_at(z)
            lw = math.log(abs(wz)) + pm1 * az + sz if wz != 0.0 else -math.inf
            if lw <= ref + math.log(1e-10):
                flags.append(f"zero at t={z:.12g} has vanishing quasi-derivative")
    return zeros, flags


def find_zeros(traj: Trajectory, tol: float = ZERO_TOL) -> list[float]:
    """Sorted zeros of the trajectory in ``(t_start, t_end]``; tangential dips emit warnings."""
    zeros, flags = scan_zeros(traj, tol)
    for msg in flags:
        warnings.warn(msg, TangentialZeroWarning, stacklevel=2)
    return zeros


@dataclass
class OscillationReport:
    zeros: list
    verdict: str
    min_zeros_required: int
    horizon: float
    t_start: float
    p: float
    lam: float
    reached: float
    error: Optional[str] = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "zeros": list(self.zeros),
            "n_zeros": len(self.zeros),
            "min_zeros_required": self.min_zeros_required,
            "t_start": self.t_start,
            "horizon": self.horizon,
            "reached": self.reached,
            "p": self.p,
            "lambda": self.lam,
            "error": self.error,
            "warnings": list(self.warnings),
        }


def oscillation_evidence(
    params: HalfLinearParams,
    profile: VolumeProfile,
    t_start: float,
    horizon: float,
    min_zeros: int = 2,
    rtol: float = RTOL,
    atol: float = ATOL,
    stop_early: bool = False,
) -> OscillationReport:
    """Harvest zeros of the solution with ``x(t_start) = 0, x'(t_start) = 1`` up to ``horizon``.

    The verdict is ``oscillatory_evidence`` when at least ``min_zeros`` zeros
    are found, ``no_zero_found`` otherwise; a finite run never claims
    nonoscillation.  With ``stop_early`` the integration ends as soon as
    ``min_zeros`` sign changes have been seen.
    """
    if not horizon > t_start:
        raise ParameterError("horizon must exceed t_start")
    if min_zeros < 2:
        raise ParameterError("min_zeros must be at least 2")
    error = None
    try:
        traj = integrate_halflinear(
            params,
            profile,
            0.0,
            1.0,
            (t_start, horizon),
            rtol=rtol,
            atol=atol,
            stop_after_sign_changes=min_zeros if stop_early else None,
        )
    except IntegrationError as exc:
        traj = exc.partial
        error = f"{exc} (reached t={exc.time:.12g})"
    zeros, flags = scan_zeros(traj) if traj is not None and len(traj) > 1 else ([], [])
    return OscillationReport(
        zeros=zeros,
        verdict=OSCILLATORY if len(zeros) >= min_zeros else NO_ZERO,
        min_zeros_required=min_zeros,
        horizon=horizon,
        t_start=t_start,
        p=params.p,
        lam=params.lam,
        reached=float(traj.t[-1]) if traj is not None else t_start,
        error=error,
        warnings=flags,
    )


def zeros_to_json(zeros) -> str:
    return json.dumps([float(z) for z in zeros])

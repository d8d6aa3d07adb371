"""Acceptance criteria 1-11, one test each.

Every test records a one-line verdict that the terminal summary prints
under "acceptance criteria".
"""

import math
import time

import numpy as np
from conftest import ACCEPTANCE_LINES
from oracles import fixed_step_zeros, half_period_quadrature, pi_p
from test_cli import GOLDEN, GOLDEN_RUNS

from halflinear.cli import COMMANDS, main
from halflinear.core import HalfLinearParams
from halflinear.criteria import PRED_OSC, THEOREM1_A, theorem1_predict
from halflinear.ode import OSCILLATORY, find_zeros, integrate_halflinear, oscillation_evidence
from halflinear.profiles import (
    RicciDecayProfile,
    constant_profile,
    exponential_profile,
    growth_exponent,
    log_cumulative_volume,
    model_manifold_profile,
    power_profile,
    ricci_volume_bound,
    tabulated_profile,
)
from halflinear.quadrature import log_integral
from halflinear.riccati import CASE_I, case_classification, growth_bound_check, integrate_riccati, riccati_from_solution
from halflinear.spectral import annulus_first_eigenvalue, oscillation_threshold, rayleigh_quotient, theta_upper_bound

SINH = model_manifold_profile(2, -1.0)
TIGHT = dict(rtol=1e-12, atol=1e-15)


def record(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    return ok


def _random_config(rng):
    """A (p, lam, profile) draw with a guaranteed oscillating start at t = 1."""
    p = float(rng.uniform(1.5, 4.0))
    lam = float(np.exp(rng.uniform(math.log(0.8), math.log(4.0))))
    kind = rng.integers(4)
    if kind == 0:
        profile = constant_profile(float(rng.uniform(0.5, 2.0)))
    elif kind == 1:
        profile = power_profile(float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 3.0)))
    elif kind == 2:
        profile = exponential_profile(float(rng.uniform(0.5, 2.0)), float(rng.uniform(-0.5, 1.0)))
    else:
        profile = model_manifold_profile(int(rng.integers(2, 4)), float(rng.uniform(-0.25, 0.0)))
    return p, lam, profile


def test_criterion_01_classical_reduction():
    t0 = time.perf_counter()
    tr = integrate_halflinear(HalfLinearParams(2, 4.0), constant_profile(), 0.0, 1.0, (0.0, 10.5 * math.pi))
    zeros = find_zeros(tr)[:20]
    elapsed = time.perf_counter() - t0
    err = max(abs(z - k * math.pi / 2) for k, z in enumerate(zeros, start=1))
    ok = len(zeros) == 20 and err <= 1e-8 and elapsed < 1.0
    record(1, ok, f"p=2 lam=4 zeros k*pi/2 k=1..20 max err {err:.2e} (tol 1e-8), {elapsed:.2f}s (< 1s)")
    assert ok


def test_criterion_02_generalized_half_period():
    details, ok = [], True
    for p in (1.5, 3.0):
        t0 = time.perf_counter()
        tr = integrate_halflinear(HalfLinearParams(p, 1.0), constant_profile(), 0.0, 1.0, (0.0, 20.0))
        z = find_zeros(tr)
        main_time = time.perf_counter() - t0
        spacing = float(np.mean(np.diff(z[:5])))
        t0 = time.perf_counter()
        oz = fixed_step_zeros(p, 1.0, 10.0, 3)
        oracle_time = time.perf_counter() - t0
        oracle_spacing = oz[1] - oz[0]
        target = pi_p(p)
        agree = abs(spacing - oracle_spacing) <= 1e-6 and abs(spacing - half_period_quadrature(p, 1.0)) <= 1e-6
        hit = abs(spacing - target) <= 1e-6
        ok &= hit and agree and main_time < 1.0 and oracle_time < 30.0
        details.append(
            f"p={p:g} spacing {spacing:.7f} vs pi_p {target:.7f} (|diff| {abs(spacing - target):.2e}); "
            f"oracle {oracle_spacing:.7f} {'agrees' if agree else 'DISAGREES'}; {main_time:.2f}s/{oracle_time:.1f}s"
        )
    note = "" if ok else " | at lam=1 the spacing is pi_p*(p-1)^(1/p); pi_p is the spacing at lam=p-1"
    record(2, ok, "; ".join(details) + note)
    assert ok


def _y_sub(tr, t):
    xm, wm, a, s = tr.local_state_at(t)
    pm1 = tr.params.p - 1.0
    return -wm * math.exp(s) / (math.copysign(abs(xm) ** pm1, xm)), xm * math.exp(a)


def test_criterion_03_riccati_correspondence():
    rng = np.random.default_rng(20260315)
    worst_rel, worst_blow, fails, needed = 0.0, 0.0, [], []
    for k in range(20):
        p, lam, profile = _random_config(rng)
        prm = HalfLinearParams(p, lam)
        tr = integrate_halflinear(prm, profile, 0.0, 1.0, (1.0, 200.0), **TIGHT)
        z = find_zeros(tr)
        assert len(z) >= 2
        t1, t2 = z[0], z[1]
        a = t1 + 0.05 * (t2 - t1)
        xmax = float(np.max(np.abs(tr.x[(tr.t > t1) & (tr.t < t2)])))
        # last time before t2 with |y| <= 1e6 and x resolvable
        lo, hi = t1 + 0.5 * (t2 - t1), t2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            y, x = _y_sub(tr, mid)
            if abs(y) <= 1e6 and abs(x) >= 1e-12 * xmax:
                lo = mid
            else:
                hi = mid
        sub = riccati_from_solution(tr, (a, lo))
        direct = integrate_riccati(prm, profile, float(sub.y[0]), (a, t2 + 1.0), **TIGHT)
        mask = np.abs(sub.y) <= 1e6
        ys = sub.y[mask]
        yd = np.array([direct.value_at(float(t)) for t in sub.t[mask]])
        # |y| passes through 0 at every extremum of x, so relative error uses max(|y|, 1)
        rel = float(np.max(np.abs(yd - ys) / np.maximum(np.abs(ys), 1.0)))
        blow = abs(direct.blow_up.time - t2) if direct.blow_up else math.inf
        worst_rel, worst_blow = max(worst_rel, rel), max(worst_blow, blow)
        if rel > 1e-6 or blow > 1e-6:
            # y ~ C/(t2 - t)^(p-1), so an error dt in the zero gives (p-1) dt/(t2 - t) relative in y
            need = 1e-6 * (t2 - lo) / (p - 1.0) / t2
            needed.append(need)
            fails.append(f"#{k} p={p:.2f} rel {rel:.1e}, zero must be exact to {need:.0e} relative")
    ok = not fails
    detail = (
        f"20 draws, max rel err {worst_rel:.2e} (tol 1e-6), max |blow-up - zero| {worst_blow:.2e} (tol 1e-6)"
        + ("" if ok else f"; {len(fails)} draws fail, needing zeros exact to {min(needed):.0e} relative (rtol 1e-12)")
    )
    record(3, ok, detail)
    assert ok, "; ".join(fails)


def test_criterion_04_quotient_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        p, lam, profile = _random_config(rng)
        tr = integrate_halflinear(HalfLinearParams(p, lam), profile, 0.0, 1.0, (1.0, 200.0))
        z = find_zeros(tr)
        q = rayleigh_quotient(tr, (z[0], z[1])).quotient
        worst = max(worst, abs(q - lam) / lam)
    ok = worst <= 1e-6
    record(4, ok, f"20 random configs, max |quotient - lam|/lam {worst:.2e} (tol 1e-6)")
    assert ok


def test_criterion_05_subexponential_regime():
    bad = []
    for c in (1.0, 3.0):
        profile = power_profile(1.0, c)
        for p in (1.5, 2.0, 3.0):
            for lam in (0.01, 0.1, 1.0):
                pred = theorem1_predict(profile, p, lam)
                rep = oscillation_evidence(HalfLinearParams(p, lam), profile, 1.0, 500.0, min_zeros=3)
                if not (pred.source == THEOREM1_A and pred.predicted == PRED_OSC and rep.verdict == OSCILLATORY):
                    bad.append((c, p, lam, pred.source, len(rep.zeros)))
    ok = not bad
    record(5, ok, f"v=t^c, 18 combinations, >=3 zeros by t=500 and theorem1_a predicted: {18 - len(bad)}/18")
    assert ok, bad


def test_criterion_06_hyperbolic_plane_threshold():
    t0 = time.perf_counter()
    lam_star, _ = oscillation_threshold(SINH, 2.0, 0.1, 0.5, 1.0, 2000.0, tol=1e-3)
    bound = theta_upper_bound(SINH, 2.0)
    elapsed = time.perf_counter() - t0
    theta_err = abs(growth_exponent(SINH, 1000.0).theta_estimate - 1.0)
    ok = abs(lam_star - 0.25) <= 0.02 and abs(bound.value - 0.25) <= 1e-6 and theta_err <= 1e-3 and elapsed < 60
    record(
        6,
        ok,
        f"lam* {lam_star:.4f} (|lam*-0.25| <= 0.02), bound {bound.value:.8f}, theta err {theta_err:.1e}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_07_general_p_threshold():
    details, ok = [], True
    for p in (1.5, 3.0):
        thr = (1.0 / p) ** p
        above = oscillation_evidence(HalfLinearParams(p, 1.2 * thr), SINH, 1.0, 2000.0, stop_early=True)
        below = oscillation_evidence(HalfLinearParams(p, 0.8 * thr), SINH, 1.0, 2000.0)
        good = above.verdict == OSCILLATORY and below.verdict != OSCILLATORY and below.reached >= 2000.0 - 1e-9
        ok &= good
        details.append(f"p={p:g} threshold {thr:.4f}: +20% {len(above.zeros)} zeros, -20% {len(below.zeros)} zeros")
    record(7, ok, "; ".join(details) + " (horizon 2000)")
    assert ok


def test_criterion_08_proof_inequalities():
    profile = exponential_profile(1.0, 3.0)
    runs, checked, holder_bad, bad = 0, 0, 0, []
    ts = np.linspace(1.0, 5.0, 100)
    for p in (1.5, 2.0, 3.0):
        assert case_classification(profile, p, 50.0) == CASE_I
        q = p / (p - 1.0)
        for lam in (0.5, 1.0, 2.0):
            prm = HalfLinearParams(p, lam)
            rt = integrate_riccati(prm, profile, 1.0, (0.0, 5.0))
            rep = growth_bound_check(rt, prm, 0.0)
            runs += 1
            checked += rep.n_checked
            if not rep.ok:
                bad.append((p, lam, rep.violations[:2]))
        for t in ts:
            lhs = log_integral(lambda s: (1.0 - q) * profile.log_v(s), t - 1.0, t)
            rhs = (1.0 - q) * log_cumulative_volume(profile, float(t))
            holder_bad += lhs < rhs - 1e-12
    ok = not bad and holder_bad == 0
    record(
        8,
        ok,
        f"v=e^(3t): {runs} runs, {checked} samples, growth+Young violations {len(bad)}; Hoelder {300 - holder_bad}/300",
    )
    assert ok, bad


def test_criterion_09_shooting_and_sturm():
    errs = []
    for L in (0.5, 1.0, math.pi):
        lam = annulus_first_eigenvalue(constant_profile(), 2.0, 0.0, L)
        errs.append(abs(lam - (math.pi / L) ** 2) / (math.pi / L) ** 2)
    rng = np.random.default_rng(9)
    grid = np.geomspace(0.05, 10.0, 50)
    monotone = 0
    for _ in range(5):
        p, _, profile = _random_config(rng)
        counts = [
            len(find_zeros(integrate_halflinear(HalfLinearParams(p, float(lam)), profile, 0.0, 1.0, (1.0, 30.0))))
            for lam in grid
        ]
        monotone += all(b >= a for a, b in zip(counts[:-1], counts[1:]))
    ok = max(errs) <= 1e-7 and monotone == 5
    record(9, ok, f"annulus (pi/L)^2 max rel err {max(errs):.1e} (tol 1e-7); Sturm monotone on {monotone}/5 profiles")
    assert ok


def test_criterion_10_ricci_remark():
    errs = []
    for n in (2, 3):
        decay = RicciDecayProfile(lambda s: math.exp(-s), n)
        for r in (0.5, 1.0, 10.0, 1e3):
            errs.append(abs(ricci_volume_bound(decay, r) / (math.e * r**n) - 1.0))
    # v = 0.9 d/dt (e t^3) stays under the bound
    t = np.linspace(1e-3, 1000.0, 4001)
    profile = tabulated_profile(t, 0.9 * 3 * math.e * t**2)
    theta = growth_exponent(profile, 1000.0).theta_estimate
    under = all(
        log_cumulative_volume(profile, float(s)) <= math.log(math.e * s**3) for s in (1.0, 10.0, 100.0, 999.0)
    )
    bound = theta_upper_bound(profile, 2.0).value
    ok = max(errs) <= 1e-8 and under and theta < 0.02 and bound == 0.0
    record(10, ok, f"bound e*r^n rel err {max(errs):.1e} (tol 1e-8); tabulated theta {theta:.4f} (< 0.02), bound {bound}")
    assert ok


def test_criterion_11_cli_contract(capsys, tmp_path):
    covered = {argv[0] for argv, _ in GOLDEN_RUNS.values()}
    same, identical, codes = 0, 0, 0
    for name, (argv, code) in GOLDEN_RUNS.items():
        got = main(argv)
        out = capsys.readouterr().out
        codes += got == code
        same += out == (GOLDEN / name).read_text()
        target = tmp_path / name
        main(argv + ["--out", str(target)])
        first = target.read_bytes()
        main(argv + ["--out", str(target)])
        identical += first == target.read_bytes()
        capsys.readouterr()
    n = len(GOLDEN_RUNS)
    ok = covered == set(COMMANDS) and same == n and identical == n and codes == n
    record(
        11,
        ok,
        f"subcommands {len(covered)}/5, golden matches {same}/{n}, byte-identical reruns {identical}/{n}, exit codes {codes}/{n}",
    )
    assert ok

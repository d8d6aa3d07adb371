import json
import math

import numpy as np
import pytest

from halflinear.core import DomainError, HalfLinearParams, ParameterError, phi
from halflinear.ode import find_zeros, integrate_halflinear
from halflinear.profiles import (
    constant_profile,
    cumulative_volume,
    exponential_profile,
    model_manifold_profile,
    power_profile,
    tabulated_profile,
)
from halflinear.quadrature import adaptive_simpson
from halflinear.riccati import (
    CASE_I,
    CASE_II,
    DIRECT,
    INCONCLUSIVE,
    SUBSTITUTION,
    case_classification,
    growth_bound_check,
    integrate_riccati,
    riccati_from_solution,
    riccati_residual,
)

ONE = constant_profile()
P2 = HalfLinearParams(2, 1)


def test_tan():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 1.5))
    assert rt.origin == DIRECT and rt.blow_up is None
    assert np.max(np.abs(rt.y - np.tan(rt.t)) / (1 + np.abs(np.tan(rt.t)))) <= 1e-7
    assert np.all(np.diff(rt.t) > 0)


def test_tan_blow_up():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 3.0))
    assert rt.blow_up.time == pytest.approx(math.pi / 2, abs=1e-6)
    assert rt.t[-1] == rt.blow_up.time and math.isinf(rt.y[-1])
    assert rt.blow_up.threshold_sequence == [1e10, 1e11, 1e12]
    d = json.loads(rt.blow_up_json())
    assert d["time"] == rt.blow_up.time and d["direction"] == "+inf"


def test_p3_blow_up_matches_zero():
    prm = HalfLinearParams(3, 1)
    rt = integrate_riccati(prm, ONE, 1.0, (0.0, 5.0))
    # x(0) = 1 and y(0) = -Phi(x'(0)) = 1 give x'(0) = -1
    tr = integrate_halflinear(prm, ONE, 1.0, -1.0, (0.0, 5.0))
    assert riccati_from_solution(tr, (0.0, 0.1)).y[0] == pytest.approx(1.0, rel=1e-14)
    assert rt.blow_up.time == pytest.approx(find_zeros(tr)[0], abs=1e-6)


def test_substitution_examples():
    tr = integrate_halflinear(P2, ONE, 0.0, 1.0, (0.0, math.pi))
    rt = riccati_from_solution(tr, (0.1, math.pi - 0.1))
    assert rt.origin == SUBSTITUTION
    assert np.max(np.abs(rt.y + 1 / np.tan(rt.t)) / (1 + np.abs(rt.y))) <= 1e-7
    # cos on (-pi/2, pi/2), shifted to the right by 2 so that times stay nonnegative
    c = 2.0
    a = c - math.pi / 2 + 0.05
    tr = integrate_halflinear(P2, ONE, math.cos(a - c), -math.sin(a - c), (a, c + math.pi / 2 - 0.05))
    rt = riccati_from_solution(tr)
    assert np.max(np.abs(rt.y - np.tan(rt.t - c)) / (1 + np.abs(rt.y))) <= 1e-7


def test_substitution_refuses_zeros():
    tr = integrate_halflinear(P2, ONE, 0.0, 1.0, (0.0, 4.0))
    with pytest.raises(DomainError, match="clip"):
        riccati_from_solution(tr)
    with pytest.raises(DomainError):
        riccati_from_solution(tr, (1.0, 3.5))


def test_residual_examples():
    assert riccati_residual(integrate_riccati(P2, ONE, 0.0, (0.0, 1.5))) < 1e-6
    tr = integrate_halflinear(P2, ONE, 0.0, 1.0, (0.0, math.pi))
    assert riccati_residual(riccati_from_solution(tr, (0.05, math.pi - 0.05))) < 1e-6
    prm = HalfLinearParams(2.5, 1.0)
    pr = power_profile(1.0, 2.0)
    tr = integrate_halflinear(prm, pr, 0.0, 1.0, (1.0, 30.0))
    z = find_zeros(tr)
    rt = riccati_from_solution(tr, (z[0] + 0.01, z[1] - 0.01))
    assert riccati_residual(rt, pr, prm) < 1e-5


def test_residual_exponential_profile_p3():
    prm = HalfLinearParams(3, 0.5)
    pr = exponential_profile(1.0, 1.0)
    tr = integrate_halflinear(prm, pr, 0.0, 1.0, (0.0, 40.0))
    z = find_zeros(tr)
    assert len(z) >= 1
    end = z[0] - 1e-3 * z[0]
    rt = riccati_from_solution(tr, (1e-3, end))
    assert np.all(np.isfinite(rt.y))
    assert riccati_residual(rt) < 1e-5


def test_residual_detects_wrong_parameter():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 1.4))
    assert riccati_residual(rt, ONE, HalfLinearParams(2, 1.1)) > 1e-3


def test_residual_needs_samples():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 1.0), dense=1)
    short = type(rt)(rt.params, rt.profile, rt.t[:5], rt.y[:5], rt.origin)
    with pytest.raises(ParameterError):
        riccati_residual(short)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 7.0])
def test_case_classification_constant(p):
    assert case_classification(ONE, p, 100.0) == CASE_II
    assert case_classification(ONE, p, 1000.0, use_closed_form=False) == CASE_II


def test_case_classification_examples():
    e2 = exponential_profile(1.0, 2.0)
    assert case_classification(e2, 2.0, 50.0) == CASE_I
    assert case_classification(e2, 2.0, 50.0, use_closed_form=False) == CASE_I
    lin = power_profile(1.0, 1.0)
    assert case_classification(lin, 2.0, 1000.0) == CASE_II
    assert case_classification(lin, 2.0, 1000.0, use_closed_form=False) == CASE_II
    # power c(q-1) > 1 converges
    assert case_classification(power_profile(1.0, 3.0, 1.0), 2.0, 1000.0) == CASE_I
    assert case_classification(power_profile(1.0, 3.0, 1.0), 2.0, 1e6, use_closed_form=False) == CASE_I
    assert case_classification(model_manifold_profile(2, -1.0), 3.0, 50.0) == CASE_I


def test_doubling_oracle_for_v_equals_t():
    # increments of int dt/t over doublings are all log 2
    for k in range(4):
        a, b = 1000.0 / 2 ** (k + 1), 1000.0 / 2**k
        val, _ = adaptive_simpson(lambda t: 1.0 / t, a, b)
        assert val == pytest.approx(math.log(2.0), rel=1e-10)


def test_case_classification_inconclusive():
    # oscillating tabulated profile: increments neither decay nor grow monotonically
    t = np.linspace(0.0, 160.0, 3201)
    v = np.exp(0.05 * t) * (1.5 + np.sin(t / 7.0))
    v[-800:] *= np.linspace(1.0, 40.0, 800)
    assert case_classification(tabulated_profile(t, v), 2.0, 160.0) == INCONCLUSIVE


def test_growth_bound_examples():
    rt = integrate_riccati(P2, ONE, math.tan(0.1), (0.1, 1.4))
    rep = growth_bound_check(rt, P2, 0.1)
    assert rep.ok and rep.n_checked == len(rt)
    # direct evaluation oracle at 100 points
    ts = np.linspace(0.1, 1.4, 100)
    assert np.all(np.tan(ts) >= math.tan(0.1) * np.exp(2 * (ts - 0.1)))
    assert math.tan(1.4) == pytest.approx(5.797883715, rel=1e-9)
    assert rep.min_growth_margin >= 0
    prm = HalfLinearParams(3, 1)
    rt = integrate_riccati(prm, exponential_profile(1.0, 3.0), 1.0, (0.0, 3.0))
    rep = growth_bound_check(rt, prm, 0.0)
    assert rep.growth_ok and rep.young_ok
    assert rep.to_dict()["violations"] == []


def test_growth_bound_equality_at_T():
    rt = integrate_riccati(P2, ONE, 0.5, (0.0, 1.0))
    rep = growth_bound_check(rt, P2, 0.0)
    assert rep.ok and rep.y_T == 0.5
    assert rep.min_growth_margin == pytest.approx(1e-8, abs=1e-15)


def test_growth_bound_detects_violation():
    rt = integrate_riccati(P2, ONE, 0.5, (0.0, 1.0))
    fake = type(rt)(rt.params, rt.profile, rt.t, rt.y * np.exp(-rt.t), rt.origin)
    rep = growth_bound_check(fake, P2, 0.0)
    assert not rep.growth_ok and rep.violations


def test_growth_bound_preconditions():
    rt = integrate_riccati(P2, ONE, -1.0, (0.0, 1.0))
    with pytest.raises(DomainError):
        growth_bound_check(rt, P2, 0.0)
    with pytest.raises(DomainError):
        growth_bound_check(rt, HalfLinearParams(2, -1), 0.5)


def _between_zeros(prm, pr, t_start, horizon, **tol):
    tr = integrate_halflinear(prm, pr, 0.0, 1.0, (t_start, horizon), **tol)
    z = find_zeros(tr)
    return tr, z


TIGHT = dict(rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize(
    "p, lam, profile, t_start",
    [
        (1.5, 1.0, constant_profile(), 0.0),
        (2.5, 2.0, power_profile(1.0, 2.0), 1.0),
        (3.0, 1.0, exponential_profile(1.0, 0.5), 0.0),
        (4.0, 0.8, model_manifold_profile(3, -0.25), 1.0),
    ],
)
def test_substitution_correspondence_and_duality(p, lam, profile, t_start):
    # near a zero y ~ 1/(t2 - t)^(p-1), so the clip keeps the comparison well conditioned
    prm = HalfLinearParams(p, lam)
    tr, z = _between_zeros(prm, profile, t_start, 80.0, **TIGHT)
    t1, t2 = z[0], z[1]
    a = t1 + 0.05 * (t2 - t1)
    sub = riccati_from_solution(tr, (a, t2 - 1e-6 * (t2 - t1)))
    direct = integrate_riccati(prm, profile, float(sub.y[0]), (a, t2 + 1.0), **TIGHT)
    mask = np.abs(sub.y) < 1e6
    yd = np.array([direct.value_at(float(t)) for t in sub.t[mask]])
    ys = sub.y[mask]
    assert np.max(np.abs(yd - ys) / np.maximum(np.abs(ys), 1.0)) <= 1e-6
    assert direct.blow_up.time == pytest.approx(t2, abs=1e-6)


def test_duality_default_tolerances():
    prm = HalfLinearParams(2.0, 1.0)
    tr, z = _between_zeros(prm, constant_profile(), 0.0, 10.0)
    a = z[0] + 0.1
    direct = integrate_riccati(prm, constant_profile(), float(riccati_from_solution(tr, (a, a + 0.1)).y[0]), (a, 10.0))
    assert direct.blow_up.time == pytest.approx(z[1], abs=1e-6)


def test_monotone_forcing():
    for prm, pr in [
        (HalfLinearParams(1.5, 0.3), power_profile(2.0, 1.0)),
        (HalfLinearParams(3, 2.0), model_manifold_profile(2, -1.0)),
    ]:
        rt = integrate_riccati(prm, pr, 0.0, (1.0, 30.0))
        y = rt.y[np.isfinite(rt.y)]
        assert np.all(np.diff(y) >= 0)


def test_young_step_random():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        p = rng.uniform(1.05, 8)
        q = p / (p - 1)
        lam, v, y = 10 ** rng.uniform(-3, 3, size=3)
        lhs = p * lam ** (1 / p) * y
        rhs = lam * v + (p - 1) * v ** (1 - q) * y**q
        assert lhs <= rhs * (1 + 1e-12)


def test_holder_step():
    # int_{t-1}^t v^{1-q} >= (int_{t-1}^t v)^{1-q} >= V(t)^{1-q}
    for p in (1.5, 2.0, 3.0):
        q = p / (p - 1)
        pr = exponential_profile(1.0, 3.0)
        for t in np.linspace(1.0, 8.0, 15):
            left, _ = adaptive_simpson(lambda s: pr.v(s) ** (1 - q), t - 1, t)
            mid, _ = adaptive_simpson(pr.v, t - 1, t)
            assert left >= mid ** (1 - q) * (1 - 1e-12)
            assert mid ** (1 - q) >= cumulative_volume(pr, t) ** (1 - q) * (1 - 1e-12)


def test_exports():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 1.0))
    lines = rt.to_csv().splitlines()
    assert lines[0] == "t,y" and len(lines) == len(rt) + 1
    assert rt.blow_up_json() == "null"


def test_value_at_between_samples():
    rt = integrate_riccati(P2, ONE, 0.0, (0.0, 1.2))
    assert rt.value_at(0.123456) == pytest.approx(math.tan(0.123456), rel=1e-8)
    tr = integrate_halflinear(P2, ONE, 0.0, 1.0, (0.0, 3.0))
    sub = riccati_from_solution(tr, (0.5, 2.5))
    assert sub.value_at(1.234) == pytest.approx(-1 / math.tan(1.234), rel=1e-8)
    assert phi(2.0, 2) == 2.0

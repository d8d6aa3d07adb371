"""Oscillation criteria: the growth-exponent theorem and the Leighton-Wintner test.

Both assume ``integral^inf v = +inf``.  Predictions are only ever of the
form "oscillatory" or "not covered"; the numerical side is compared
through :func:`cross_validate`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .core import DomainError, HypothesisError, ParameterError, _check_p
from .ode import OSCILLATORY, OscillationReport
from .profiles import VolumeProfile, growth_exponent, volume_diverges
from .riccati import CASE_II, case_classification

THETA_ZERO_TOL = 0.02
STRICT_MARGIN = 1e-9
DEFAULT_T_MAX = 1000.0

THEOREM1_A = "theorem1_a"
THEOREM1_B = "theorem1_b"
LEIGHTON_WINTNER = "leighton_wintner"
NONE_APPLICABLE = "none_applicable"

PRED_OSC = "oscillatory"
NOT_COVERED = "not_covered"

CONSISTENT = "CONSISTENT"
HORIZON_LIMITED = "HORIZON_LIMITED"
UNINFORMATIVE = "UNINFORMATIVE"


@dataclass(frozen=True)
class CriterionPrediction:
    source: str
    predicted: str
    theta: float
    lam: float
    threshold: float
    volume_divergent: bool
    p: float

    def __post_init__(self):
        if self.predicted == PRED_OSC and not self.volume_divergent:
            raise ValueError("an oscillation prediction requires divergent volume")
        if self.source == THEOREM1_B and not self.lam > self.threshold:
            raise ValueError("theorem1_b requires lambda strictly above the threshold")

    @property
    def oscillatory(self) -> bool:
        return self.predicted == PRED_OSC

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "predicted": self.predicted,
            "theta": self.theta if math.isfinite(self.theta) else None,
            "lambda": self.lam,
            "threshold": self.threshold,
            "p": self.p,
            "volume_divergent": self.volume_divergent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)


def growth_threshold(c: float, p: float) -> float:
    """``c^p / p^p``: oscillation threshold for growth exponent ``c``."""
    p = _check_p(p)
    return (c / p) ** p


def theorem1_predict(
    profile: VolumeProfile,
    p: float,
    lam: float,
    t_max: float = DEFAULT_T_MAX,
    theta_zero_tol: float = THETA_ZERO_TOL,
) -> CriterionPrediction:
    """Oscillation predicted by the growth exponent of ``V``.

    Part (a): ``lam > 0`` and ``theta = 0`` (numerically ``theta <= theta_zero_tol``).
    Part (b): ``lam > theta^p / p^p`` with ``c = theta``, enforced with a
    relative margin of 1e-9 so that ``lam`` on the threshold is not covered.

    Raises:
        HypothesisError: the volume is not verifiably divergent.
    """
    p = _check_p(p)
    if not math.isfinite(lam):
        raise DomainError("lambda must be finite")
    if not volume_diverges(profile, t_max):
        raise HypothesisError(
            "volume is not verifiably divergent; every criterion needs integral^inf v = +inf",
            hypothesis="∫^∞ v = +∞",
        )
    theta = growth_exponent(profile, t_max).theta
    if lam > 0 and theta <= theta_zero_tol:
        return CriterionPrediction(THEOREM1_A, PRED_OSC, theta, lam, 0.0, True, p)
    threshold = growth_threshold(theta, p)
    if lam > threshold * (1.0 + STRICT_MARGIN) and lam > 0:
        return CriterionPrediction(THEOREM1_B, PRED_OSC, theta, lam, threshold, True, p)
    return CriterionPrediction(NONE_APPLICABLE, NOT_COVERED, theta, lam, threshold, True, p)


def leighton_wintner_check(
    profile: VolumeProfile, p: float, lam: float, horizon: float = DEFAULT_T_MAX
) -> CriterionPrediction:
    """Oscillation when both ``integral v^(1-q)`` and ``integral lam v`` diverge."""
    p = _check_p(p)
    if not lam > 0:
        raise DomainError("the Leighton-Wintner test needs lam > 0")
    divergent = volume_diverges(profile, horizon)
    case = case_classification(profile, p, horizon)
    if divergent and case == CASE_II:
        return CriterionPrediction(LEIGHTON_WINTNER, PRED_OSC, math.nan, lam, 0.0, True, p)
    return CriterionPrediction(NONE_APPLICABLE, NOT_COVERED, math.nan, lam, 0.0, divergent, p)


def cross_validate(prediction: CriterionPrediction, report: OscillationReport) -> str:
    """Compare a prediction with numerical zero evidence.

    A missing zero under an oscillation prediction is ``HORIZON_LIMITED``,
    never a refutation.
    """
    if not (math.isclose(prediction.p, report.p, rel_tol=1e-12) and math.isclose(prediction.lam, report.lam, rel_tol=1e-12, abs_tol=1e-300)):
        raise ParameterError(
            f"prediction (p={prediction.p}, lambda={prediction.lam}) and report "
            f"(p={report.p}, lambda={report.lam}) refer to different equations"
        )
    if not prediction.oscillatory:
        return UNINFORMATIVE
    return CONSISTENT if report.verdict == OSCILLATORY else HORIZON_LIMITED

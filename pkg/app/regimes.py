"""
Regime classifier.

Maps flow coefficients to the guarantee that covers them: convergence mode of
the trajectory and the decay exponents e of g(x(t)) - min g = O(t^-e) and
||x'(t)|| = O(t^-e).
"""
from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Tuple

from app.dynamics import Params
from app.exceptions import ValidationError

STRONG_A = "STRONG_A"
STRONG_B = "STRONG_B"
CRITICAL = "CRITICAL"
WEAK = "WEAK"
Q1_CLASSIC = "Q1_CLASSIC"
OUTSIDE = "OUTSIDE"

REGIMES = (STRONG_A, STRONG_B, CRITICAL, WEAK, Q1_CLASSIC, OUTSIDE)

MODE_STRONG = "strong-to-min-norm"
MODE_WEAK = "weak-to-some-minimizer"
MODE_NONE = "none-claimed"

# Boundaries are closed: p within this distance of q+1 is critical, of (3q+1)/2 is STRONG_A
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class RegimeReport:
    """Guarantee bundle for one set of flow coefficients."""
    regime_id: str
    convergence_mode: str
    value_rate_exponent: float
    velocity_rate_exponent: float
    little_o: bool
    hypotheses_checked: List[Tuple[str, bool]] = field(default_factory=list)

    @property
    def covered(self) -> bool:
        return self.value_rate_exponent > 0

    def to_dict(self) -> Dict[str, object]:
        return {
            'regime': self.regime_id,
            'mode': self.convergence_mode,
            'value_exponent': self.value_rate_exponent,
            'velocity_exponent': self.velocity_rate_exponent,
            'little_o': self.little_o,
        }


def _close(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=0.0, abs_tol=BOUNDARY_TOL)


def _p2_ok(params: Params) -> bool:
    q = params.q
    return params.a >= q * (1.0 - q) - BOUNDARY_TOL


def regime_predicates(params: Params) -> Dict[str, bool]:
    """
    Evaluate the membership condition of every regime independently.

    For valid params exactly one entry is True.
    """
    q, p, a, alpha = params.q, params.p, params.a, params.alpha
    q1 = q == 1.0
    regular = (not q1) and a > 0
    split = (3.0 * q + 1.0) / 2.0
    critical = q + 1.0
    below_critical = p < critical and not _close(p, critical)
    above_critical = p > critical and not _close(p, critical)
    p_below_two = p < 2.0 and not _close(p, 2.0)
    p_above_two = p > 2.0 and not _close(p, 2.0)
    return {
        STRONG_B: regular and p < split and not _close(p, split),
        STRONG_A: regular and (p > split or _close(p, split)) and below_critical,
        CRITICAL: regular and _close(p, critical),
        WEAK: regular and above_critical and (
            p_below_two or (_close(p, 2.0) and _p2_ok(params))
        ),
        Q1_CLASSIC: q1 and alpha > 3.0,
        OUTSIDE: (q1 and alpha <= 3.0)
                 or ((not q1) and a == 0)
                 or (regular and above_critical and (
                     p_above_two or (_close(p, 2.0) and not _p2_ok(params)))),
    }


def pointwise_rates(params: Params) -> Optional[Tuple[float, float]]:
    """
    General pointwise (value, velocity) exponents for 0<q<1, 0<p<=2.

    Returns None when the hypotheses (including a >= q(1-q) at p=2) fail.
    """
    q, p = params.q, params.p
    if not (0 < q < 1 and params.a > 0 and 0 < p and (p < 2 or _close(p, 2.0))):
        return None
    if _close(p, 2.0) and not _p2_ok(params):
        return None
    if q < p / 2.0:
        return 2.0 * q, q
    return p, p / 2.0


def damping_window(p: float) -> Optional[Tuple[float, float]]:
    """
    Open interval of damping exponents q giving value decay O(t^-p) at fixed p.

    Returns None for p outside (0, 2).
    """
    if not 0 < p < 2:
        return None
    return max(0.0, (2.0 * p - 1.0) / 3.0), 1.0


def gronwall_cap(params: Params, b: float) -> float:
    """
    Upper bound on the Gronwall coefficient K admitted by the energy estimate.

    Raises:
        ValidationError: if b is outside its admissible interval or the cap is
            not positive
    """
    alpha, q, a, p = params.alpha, params.q, params.a, params.p
    if q == 1.0:
        if not 2.0 < b < alpha - 1.0:
            raise ValidationError(f"b must lie in (2, alpha-1) for q=1, got {b}")
        cap = min(b - 2.0, alpha - 1.0 - b, a / (alpha + b - 1.0))
    else:
        if not 0.0 < b < alpha:
            raise ValidationError(f"b must lie in (0, alpha), got {b}")
        shift = q * (1.0 - q) if _close(p, 2.0) else 0.0
        cap = min(b, alpha - b, (a - shift) / (alpha + b))
    if cap <= 0:
        raise ValidationError(f"No admissible Gronwall coefficient for {params.to_dict()}")
    return cap


def classify_regime(params: Params) -> RegimeReport:
    """
    Classify params into exactly one regime.

    STRONG_A/STRONG_B: strong convergence to the minimal-norm minimizer.
    WEAK: convergence to some minimizer with little-o rates.
    CRITICAL: pointwise rates only.
    Q1_CLASSIC: q = 1, alpha > 3.
    """
    predicates = regime_predicates(params)
    fired = [name for name in REGIMES if predicates[name]]
    if len(fired) != 1:
        raise ValidationError(f"Regime predicates not exclusive for {params.to_dict()}: {fired}")
    regime = fired[0]
    q, p, a, alpha = params.q, params.p, params.a, params.alpha
    hypotheses: List[Tuple[str, bool]] = [
        ("0<q<1", 0 < q < 1),
        ("a>0", a > 0),
    ]

    if regime == STRONG_A:
        hypotheses.append(("(3q+1)/2<=p<q+1", True))
        velocity = 2.0 * q - p + 1.0
        if p <= (4.0 * q + 2.0) / 3.0 + BOUNDARY_TOL:
            value = p
        else:
            value = 4.0 * q - 2.0 * p + 2.0
        return RegimeReport(regime, MODE_STRONG, value, velocity, False, hypotheses)

    if regime == STRONG_B:
        hypotheses.append(("0<p<(3q+1)/2", True))
        velocity = (p + 1.0 - max(q, p - q)) / 2.0
        return RegimeReport(regime, MODE_STRONG, p, velocity, False, hypotheses)

    if regime == WEAK:
        hypotheses.append(("q+1<p<=2", True))
        if _close(p, 2.0):
            hypotheses.append(("a>=q(1-q)", True))
        return RegimeReport(regime, MODE_WEAK, 2.0 * q, q, True, hypotheses)

    if regime == Q1_CLASSIC:
        hypotheses = [("q=1", True), ("alpha>3", True)]
        # Without the Tikhonov term the p -> infinity branch applies
        exponent = 2.0 if a == 0 else min(p, 2.0)
        return RegimeReport(regime, MODE_NONE, exponent, exponent / 2.0, False, hypotheses)

    rates = pointwise_rates(params)
    if regime == CRITICAL:
        hypotheses.append(("p=q+1", True))
        value, velocity = rates if rates is not None else (0.0, 0.0)
        return RegimeReport(regime, MODE_NONE, value, velocity, False, hypotheses)

    if q == 1.0:
        hypotheses = [("q=1", True), ("alpha>3", alpha > 3.0)]
    else:
        hypotheses.append(("p<=2", p < 2.0 or _close(p, 2.0)))
        if _close(p, 2.0):
            hypotheses.append(("a>=q(1-q)", _p2_ok(params)))
    value, velocity = rates if rates is not None else (0.0, 0.0)
    return RegimeReport(OUTSIDE, MODE_NONE, value, velocity, False, hypotheses)

"""
Energy functionals and convergence diagnostics over sampled trajectories.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.dynamics import FlowState, Params
from app.exceptions import ValidationError
from app.integrator import Trajectory
from app.problems import Problem
from app.regimes import OUTSIDE, RegimeReport, classify_regime, gronwall_cap
from app.tikhonov import TikhonovCurve, TikhonovPoint, regularized_value, weight

logger = logging.getLogger(__name__)

Vector = np.ndarray

VALUE_FLOOR = 1e-300
SLOPE_TOLERANCE = 0.15
NOISE_FACTOR = 1e3


@dataclass(frozen=True)
class EnergyConfig:
    """Mixing coefficient b, Gronwall coefficient K and weight exponent r."""
    b: float
    K: float
    r: float

    @classmethod
    def default(cls, params: Params, safety: float = 0.9) -> 'EnergyConfig':
        """b = alpha/2 (q<1) or (alpha+1)/2 (q=1) and K = safety * cap."""
        if params.q == 1.0:
            b = (params.alpha + 1.0) / 2.0
        else:
            b = params.alpha / 2.0
        return cls.for_b(params, b, safety)

    @classmethod
    def for_b(cls, params: Params, b: float, safety: float = 0.9) -> 'EnergyConfig':
        K = safety * gronwall_cap(params, b)
        return cls(b=b, K=K, r=max(params.q, params.p - params.q))

    def validate(self, params: Params) -> None:
        if not 0 < self.b < params.alpha:
            raise ValidationError(f"b must lie in (0, alpha), got {self.b}")
        if self.K <= 0:
            raise ValidationError("K must be positive")
        if not math.isclose(self.r, max(params.q, params.p - params.q)):
            raise ValidationError("r must equal max(q, p - q)")


def energy_E(sample: FlowState, params: Params, problem: Problem, cfg: EnergyConfig) -> float:
    """
    t^2q (g - g*) + (a/2) t^(2q-p) ||x||^2 + 1/2 ||b (x - x*) + t^q x'||^2
    + (b (alpha - b - q t^(q-1)) / 2) ||x - x*||^2
    """
    t, q, b = sample.t, params.q, cfg.b
    x = np.asarray(sample.x, dtype=float)
    v = np.asarray(sample.v, dtype=float)
    offset = x - problem.x_star
    mixed = b * offset + t ** q * v
    return (
        t ** (2 * q) * problem.value_gap(x)
        + 0.5 * params.a * t ** (2 * q - params.p) * float(x @ x)
        + 0.5 * float(mixed @ mixed)
        + 0.5 * b * (params.alpha - b - q * t ** (q - 1)) * float(offset @ offset)
    )


def energy_E_strong(sample: FlowState, params: Params, problem: Problem, cfg: EnergyConfig,
                    tik: TikhonovPoint) -> float:
    """
    Energy built on the Tikhonov curve point x_t:
    t^2q (g_t(x) - g_t(x_t)) + 1/2 ||b (x - x_t) + t^q x'||^2
    + (b (alpha - b - q t^(q-1)) / 2) ||x - x_t||^2
    """
    if not math.isclose(tik.t, sample.t, rel_tol=1e-12, abs_tol=0.0):
        raise ValidationError(f"Curve point at t={tik.t} does not match sample at t={sample.t}")
    t, q, b = sample.t, params.q, cfg.b
    x = np.asarray(sample.x, dtype=float)
    v = np.asarray(sample.v, dtype=float)
    offset = x - tik.x_t
    mixed = b * offset + t ** q * v
    gap = regularized_value(problem, x, t, params.a, params.p) \
        - regularized_value(problem, tik.x_t, t, params.a, params.p)
    return (
        t ** (2 * q) * gap
        + 0.5 * float(mixed @ mixed)
        + 0.5 * b * (params.alpha - b - q * t ** (q - 1)) * float(offset @ offset)
    )


def energy_W(sample: FlowState, params: Params, problem: Problem) -> float:
    """1/2 ||x'||^2 + g(x) + (a / 2 t^p) ||x||^2."""
    x = np.asarray(sample.x, dtype=float)
    v = np.asarray(sample.v, dtype=float)
    return 0.5 * float(v @ v) + float(problem.objective(x)) \
        + 0.5 * params.a / sample.t ** params.p * float(x @ x)


def w_dissipation(sample: FlowState, params: Params) -> float:
    """Exact dW/dt = -(alpha/t^q) ||x'||^2 - (a p / 2 t^(p+1)) ||x||^2."""
    x = np.asarray(sample.x, dtype=float)
    v = np.asarray(sample.v, dtype=float)
    t = sample.t
    return -(params.alpha / t ** params.q) * float(v @ v) \
        - 0.5 * params.a * params.p / t ** (params.p + 1) * float(x @ x)


def energy_series(traj: Trajectory, cfg: EnergyConfig) -> Vector:
    return np.array([energy_E(s, traj.params, traj.problem, cfg) for s in traj.samples])


def w_series(traj: Trajectory) -> Vector:
    return np.array([energy_W(s, traj.params, traj.problem) for s in traj.samples])


def positivity_onset(params: Params, b: float) -> float:
    """Earliest t >= t0 with alpha - b - q t^(q-1) > 0 (inf if never)."""
    q, alpha = params.q, params.alpha
    if q == 1.0:
        return params.t0 if alpha - b - 1.0 > 0 else math.inf
    if alpha - b <= 0:
        return math.inf
    onset = ((alpha - b) / q) ** (1.0 / (q - 1.0))
    return max(params.t0, onset)


@dataclass
class DescentReport:
    """Non-increase check of W along consecutive samples."""
    worst_increase: float
    worst_time: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_w_descent(traj: Trajectory, rel_slack: float = 1e-8) -> DescentReport:
    """W(t_{i+1}) <= W(t_i) + rel_slack (1 + |W(t_i)|) for all consecutive samples."""
    W = w_series(traj)
    allowed = rel_slack * (1.0 + np.abs(W[:-1]))
    excess = (W[1:] - W[:-1]) - allowed
    worst = int(np.argmax(excess)) if excess.size else 0
    violations = int(np.sum(excess > 0))
    if violations:
        logger.warning(f"W increased on {violations} sample pairs of {traj.problem_id}")
    return DescentReport(
        worst_increase=float(excess[worst]) if excess.size else 0.0,
        worst_time=float(traj.times[worst + 1]) if excess.size else float(traj.times[0]),
        violations=violations,
    )


@dataclass
class GronwallReport:
    """Outcome of the discrete check of E' + (K/t^r) E <= (a b / 2) t^(q-p) ||x*||^2."""
    times: Vector
    margins: Vector
    onset: Optional[float]
    t_end: float
    min_tail_decades: float = 1.0

    @property
    def passed(self) -> bool:
        if self.onset is None:
            return False
        return math.log10(self.t_end / self.onset) >= self.min_tail_decades

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins))

    @property
    def worst_time(self) -> float:
        return float(self.times[int(np.argmin(self.margins))])

    @property
    def tail_worst_margin(self) -> float:
        """Worst margin past the onset (or over the final decade when none)."""
        start = self.onset if self.onset is not None else self.t_end / 10.0
        tail = self.margins[self.times >= start]
        return float(np.min(tail)) if tail.size else 0.0


def check_gronwall(traj: Trajectory, params: Params, problem: Problem, cfg: EnergyConfig,
                   min_tail_decades: float = 1.0) -> GronwallReport:
    """
    Check the Gronwall inequality on the samples and locate its onset t1.

    E' is estimated by second order central differences; the slack per sample
    is 10 h^2 |E'''| + 1e-8 (1 + |E|) with h the local spacing and E''' a
    finite-difference estimate. The check passes when the inequality holds
    from t1 on and at least min_tail_decades separate t1 from the last sample.

    Raises:
        ValidationError: for params outside every covered regime or a
            trajectory too short to difference
    """
    if classify_regime(params).regime_id == OUTSIDE:
        raise ValidationError("Gronwall check needs params covered by a regime")
    times = traj.times
    if times.size < 7:
        raise ValidationError("Gronwall check needs at least 7 samples")
    q, p = params.q, params.p
    E = energy_series(traj, cfg)
    dE = np.gradient(E, times)
    d3E = np.gradient(np.gradient(dE, times), times)
    spacing = np.gradient(times)
    x_star = problem.x_star
    bound = 0.5 * params.a * cfg.b * times ** (q - p) * float(x_star @ x_star)
    slack = 10.0 * spacing ** 2 * np.abs(d3E) + 1e-8 * (1.0 + np.abs(E))
    lhs = dE + cfg.K / times ** cfg.r * E
    margins = (bound + slack - lhs)[2:-2]
    inner = times[2:-2]

    violated = np.nonzero(margins < 0)[0]
    if violated.size == 0:
        onset: Optional[float] = float(inner[0])
    elif violated[-1] + 1 < inner.size:
        onset = float(inner[violated[-1] + 1])
    else:
        onset = None
    report = GronwallReport(times=inner, margins=margins, onset=onset, t_end=float(times[-1]),
                            min_tail_decades=min_tail_decades)
    if not report.passed:
        logger.warning(
            f"Gronwall inequality violated: worst margin {report.tail_worst_margin:.3e}, onset {onset}"
        )
    return report


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (ln t, ln y) inside a window."""
    slope: float
    intercept: float
    window: Tuple[float, float]
    residual_rms: float
    n_points: int
    excluded: int = 0


def fit_rate(times: Sequence[float], values: Sequence[float],
             window: Tuple[float, float]) -> RateFit:
    """
    Fit the decay exponent of a positive series.

    Samples with y <= 1e-300 are excluded and counted.

    Raises:
        ValidationError: for an empty window or fewer than 10 usable points
    """
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValidationError(f"Invalid window ({t_lo}, {t_hi})")
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    inside = (t >= t_lo) & (t <= t_hi)
    usable = inside & (y > VALUE_FLOOR) & np.isfinite(y)
    excluded = int(np.sum(inside & ~usable))
    n_points = int(np.sum(usable))
    if n_points < 10:
        raise ValidationError(f"Only {n_points} usable points in window ({t_lo:g}, {t_hi:g})")
    log_t = np.log(t[usable])
    log_y = np.log(y[usable])
    slope, intercept = np.polyfit(log_t, log_y, 1)
    residual = log_y - (slope * log_t + intercept)
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        window=(float(t_lo), float(t_hi)),
        residual_rms=float(np.sqrt(np.mean(residual ** 2))),
        n_points=n_points,
        excluded=excluded,
    )


@dataclass
class RateCheck:
    """Observed slopes compared with guaranteed exponents."""
    value_fit: Optional[RateFit]
    speed_fit: Optional[RateFit]
    value_exponent: float
    velocity_exponent: float
    tolerance: float = SLOPE_TOLERANCE

    @staticmethod
    def _sound(fit: Optional[RateFit], exponent: float, tolerance: float) -> bool:
        # A series that collapsed to the floor decays faster than any power
        return fit is None or fit.slope <= -exponent + tolerance

    @property
    def value_ok(self) -> bool:
        return self._sound(self.value_fit, self.value_exponent, self.tolerance)

    @property
    def speed_ok(self) -> bool:
        return self._sound(self.speed_fit, self.velocity_exponent, self.tolerance)

    @property
    def passed(self) -> bool:
        return self.value_ok and self.speed_ok


def gap_noise_floor(traj: Trajectory, factor: float = NOISE_FACTOR) -> Vector:
    """
    Value gap that position errors at the absolute tolerance can produce.

    Per sample: ||hess g(x)|| * (factor * abs_tol * (1 + ||x||))^2. Once the
    true gap is below it, local errors keep the fast modes excited at about
    this level and the samples carry no rate information.
    """
    curvature = np.array([np.linalg.norm(traj.problem.hessian(x), 2) for x in traj.xs])
    scale = factor * traj.config.abs_tol * (1.0 + np.linalg.norm(traj.xs, axis=1))
    return curvature * scale ** 2


def _tail_fit(times: Vector, values: Vector, window: Tuple[float, float],
              floor: Optional[Vector] = None) -> Optional[RateFit]:
    values = np.asarray(values, dtype=float)
    if floor is not None:
        values = np.where(values <= floor, 0.0, values)
    try:
        return fit_rate(times, values, window)
    except ValidationError:
        inside = (times >= window[0]) & (times <= window[1])
        if not np.any(inside):
            raise
        if np.any(values[inside] <= VALUE_FLOOR) or np.all(values[inside] <= VALUE_FLOOR * 1e10):
            return None
        raise


def check_rates(traj: Trajectory, report: RegimeReport, decades: float = 2.0,
                tolerance: float = SLOPE_TOLERANCE) -> RateCheck:
    """
    Fit value gap and speed over the final decades against the guaranteed exponents.

    Gap samples at or below gap_noise_floor count as collapsed, the same way as
    samples at the 1e-300 floor.
    """
    t_end = float(traj.times[-1])
    window = (t_end / 10.0 ** decades, t_end)
    gap = np.maximum(traj.value_gap, 0.0)
    return RateCheck(
        value_fit=_tail_fit(traj.times, gap, window, gap_noise_floor(traj)),
        speed_fit=_tail_fit(traj.times, traj.speed, window),
        value_exponent=report.value_rate_exponent,
        velocity_exponent=report.velocity_rate_exponent,
        tolerance=tolerance,
    )


def little_o_tail(traj: Trajectory, q: float) -> bool:
    """t^2q (g - g*) at the last sample is strictly below its value one decade earlier."""
    t_end = float(traj.times[-1])
    earlier = int(np.searchsorted(traj.times, t_end / 10.0))
    scaled = traj.times ** (2 * q) * traj.value_gap
    return bool(scaled[-1] < scaled[earlier])


@dataclass
class IntegralEstimate:
    """Cumulative trapezoid integral of t^exponent * quantity."""
    times: Vector
    cumulative: Vector
    plateau: bool

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])


QUANTITIES = ('speed2', 'value_gap')


def cumulative_integral(times: Sequence[float], quantity: Sequence[float],
                        exponent: float) -> IntegralEstimate:
    """
    Integrate t^exponent * quantity and decide whether it has plateaued.

    Plateau means the last decade contributes less than 5% of the total.
    """
    t = np.asarray(times, dtype=float)
    integrand = t ** exponent * np.asarray(quantity, dtype=float)
    cumulative = cumulative_trapezoid(integrand, t, initial=0.0)
    total = cumulative[-1]
    if total <= 0:
        return IntegralEstimate(times=t, cumulative=cumulative, plateau=True)
    before_last_decade = float(np.interp(t[-1] / 10.0, t, cumulative))
    plateau = (total - before_last_decade) < 0.05 * total
    return IntegralEstimate(times=t, cumulative=cumulative, plateau=bool(plateau))


def integral_estimate(traj: Trajectory, exponent: float, quantity: str) -> IntegralEstimate:
    """
    Integral estimate over a trajectory.

    Arguments:
        quantity: 'speed2' for ||x'||^2 or 'value_gap' for g(x) - g*
    """
    if quantity == 'speed2':
        values = traj.speed ** 2
    elif quantity == 'value_gap':
        values = np.maximum(traj.value_gap, 0.0)
    else:
        raise ValidationError(f"Unknown quantity: {quantity} (expected one of {QUANTITIES})")
    return cumulative_integral(traj.times, values, exponent)


@dataclass(frozen=True)
class StabilizationReport:
    """Oscillation of ||x(t) - reference|| over the final decade."""
    oscillation: float
    final_value: float

    @property
    def stabilized(self) -> bool:
        return self.oscillation < 0.05 * (1.0 + self.final_value)


def limit_stabilization(traj: Trajectory, reference: Vector) -> StabilizationReport:
    distances = traj.distance_to(reference)
    tail = distances[traj.times >= traj.times[-1] / 10.0]
    return StabilizationReport(
        oscillation=float(np.max(tail) - np.min(tail)),
        final_value=float(distances[-1]),
    )


def curve_distance(traj: Trajectory) -> Vector:
    """||x(t) - x_t|| at every sample (requires a > 0)."""
    params = traj.params
    curve = TikhonovCurve(traj.problem, params.a, params.p)
    points = curve.sweep(traj.times)
    return np.array([np.linalg.norm(x - point.x_t) for x, point in zip(traj.xs, points)])


def format_report(mapping: Mapping[str, object]) -> str:
    """Line-oriented key=value block."""
    lines: List[str] = []
    for key, value in mapping.items():
        if isinstance(value, float):
            value = f"{value:.17g}"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


@dataclass
class DiagnosticsSummary:
    """Everything the experiment harness reports for one run."""
    regime: RegimeReport
    rates: Optional[RateCheck] = None
    w_descent: Optional[DescentReport] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = dict(self.regime.to_dict())
        if self.rates is not None:
            if self.rates.value_fit is not None:
                out['value_slope'] = self.rates.value_fit.slope
            if self.rates.speed_fit is not None:
                out['speed_slope'] = self.rates.speed_fit.slope
            out['rates_ok'] = self.rates.passed
        if self.w_descent is not None:
            out['w_descent_ok'] = self.w_descent.passed
            out['w_worst_increase'] = self.w_descent.worst_increase
        out.update(self.extra)
        return out


def summarize(traj: Trajectory, decades: float = 2.0) -> DiagnosticsSummary:
    """Regime, tail rate fits and W descent for a trajectory."""
    regime = classify_regime(traj.params)
    summary = DiagnosticsSummary(regime=regime, w_descent=check_w_descent(traj))
    span = math.log10(traj.times[-1] / traj.times[0])
    try:
        summary.rates = check_rates(traj, regime, decades=min(decades, span))
    except ValidationError as e:
        logger.warning(f"Rate fit skipped for {traj.problem_id}: {e}")
    summary.extra['final_value_gap'] = float(traj.value_gap[-1])
    summary.extra['final_dist_to_xstar'] = float(traj.dist_to_xstar[-1])
    summary.extra['final_speed'] = float(traj.speed[-1])
    return summary

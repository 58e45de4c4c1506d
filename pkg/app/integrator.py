"""
Adaptive Dormand-Prince 5(4) integration of the first order flow system.

Steps are accepted when the embedded error norm is at most 1, the step size is
driven by a PI controller, and the solution is sampled on a logarithmic time
grid through the pair's quartic continuous extension.
"""
from dataclasses import dataclass, field
from functools import cached_property
import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from app.dynamics import FlowState, Params, check_structure, make_vector_field
from app.exceptions import (
    AcceptanceError,
    ConfigurationError,
    IntegrationError,
    NonFiniteStateError,
    StepBudgetExceeded,
)
from app.problems import Problem, make_flat, make_shifted_quadratic, make_degenerate_quadratic

logger = logging.getLogger(__name__)

Vector = np.ndarray

# Samples may not undercut the declared minimum by more than this
MIN_VALUE_GAP = -1e-10


@dataclass
class IntegratorConfig:
    """Tolerances, step bounds and sampling density of an integration."""
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    initial_step: Optional[float] = None
    max_step: Optional[float] = None
    max_rhs_evals: int = 50_000_000
    sample_points_per_decade: int = 200
    # Controller disabled when set: every step has this length and is accepted
    fixed_step: Optional[float] = None

    def validate(self) -> None:
        """Validate config settings."""
        if self.rel_tol < 1e-14:
            raise ConfigurationError("rel_tol must be at least 1e-14")
        if self.abs_tol <= 0:
            raise ConfigurationError("abs_tol must be positive")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ConfigurationError("initial_step must be positive")
        if self.max_step is not None and self.max_step <= 0:
            raise ConfigurationError("max_step must be positive")
        if self.max_rhs_evals <= 0:
            raise ConfigurationError("max_rhs_evals must be positive")
        if self.sample_points_per_decade <= 0:
            raise ConfigurationError("sample_points_per_decade must be positive")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise ConfigurationError("fixed_step must be positive")

    def resolved_steps(self, t0: float, t_end: float) -> Tuple[float, float]:
        """Concrete (initial_step, max_step) for an interval."""
        initial = self.initial_step if self.initial_step is not None else 1e-4 * t0
        largest = self.max_step if self.max_step is not None else (t_end - t0) / 10.0
        return min(initial, largest), largest

    def to_dict(self) -> Dict[str, object]:
        return {
            'rel_tol': self.rel_tol,
            'abs_tol': self.abs_tol,
            'initial_step': self.initial_step,
            'max_step': self.max_step,
            'max_rhs_evals': self.max_rhs_evals,
            'sample_points_per_decade': self.sample_points_per_decade,
            'fixed_step': self.fixed_step,
        }


def log_grid(t0: float, t_end: float, points_per_decade: int) -> Vector:
    """Times uniform in log t from t0 to t_end, both ends exact."""
    decades = math.log10(t_end / t0)
    count = max(2, int(round(decades * points_per_decade)) + 1)
    grid = t0 * 10.0 ** np.linspace(0.0, decades, count)
    grid[0] = t0
    grid[-1] = t_end
    return grid


@dataclass(eq=False)
class Trajectory:
    """Sampled approximate solution with integrator metadata."""
    times: Vector
    xs: np.ndarray
    vs: np.ndarray
    problem: Problem
    params: Params
    config: IntegratorConfig
    accepted_steps: int = 0
    rejected_steps: int = 0
    rhs_evals: int = 0
    t_reached: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def problem_id(self) -> str:
        return self.problem.identifier

    @property
    def samples(self) -> List[FlowState]:
        return [FlowState(t=float(t), x=x, v=v) for t, x, v in zip(self.times, self.xs, self.vs)]

    def state(self, index: int) -> FlowState:
        return FlowState(t=float(self.times[index]), x=self.xs[index], v=self.vs[index])

    @cached_property
    def value_gap(self) -> Vector:
        """g(x(t)) - g_star at every sample."""
        return np.array([self.problem.value_gap(x) for x in self.xs])

    @cached_property
    def speed(self) -> Vector:
        """||x'(t)|| at every sample."""
        return np.linalg.norm(self.vs, axis=1)

    @cached_property
    def dist_to_xstar(self) -> Vector:
        """||x(t) - x_star|| at every sample."""
        return np.linalg.norm(self.xs - self.problem.x_star, axis=1)

    def distance_to(self, reference: Vector) -> Vector:
        return np.linalg.norm(self.xs - np.asarray(reference, dtype=float), axis=1)

    def window(self, t_lo: float, t_hi: float) -> np.ndarray:
        """Boolean mask of samples with t_lo <= t <= t_hi."""
        return (self.times >= t_lo) & (self.times <= t_hi)


class DormandPrince:
    """Dormand-Prince 5(4) pair with FSAL stage and quartic dense output."""

    C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
    A = [
        np.array([]),
        np.array([1 / 5]),
        np.array([3 / 40, 9 / 40]),
        np.array([44 / 45, -56 / 15, 32 / 9]),
        np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
        np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    ]
    B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
    # Fifth order minus embedded fourth order weights, including the FSAL stage
    E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
    # Continuous extension: y(t + s h) = y + h K^T P [s, s^2, s^3, s^4]
    P = np.array([
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ])
    order = 5
    stages = 7

    def step(self, f: Callable[[float, Vector], Vector], t: float, y: Vector, h: float,
             k1: Vector) -> Tuple[Vector, Vector, np.ndarray]:
        """
        Advance one step of size h.

        Returns:
            (y_new, error_estimate, K) where K stacks the seven stage derivatives;
            K[6] is f(t + h, y_new) and serves as k1 of the next step.
        """
        K = np.empty((self.stages, y.size))
        K[0] = k1
        for i in range(1, 6):
            K[i] = f(t + self.C[i] * h, y + h * (self.A[i] @ K[:i]))
        y_new = y + h * (self.B @ K[:6])
        K[6] = f(t + h, y_new)
        error = h * (self.E @ K)
        return y_new, error, K

    def dense(self, K: np.ndarray, y_old: Vector, h: float, theta: float) -> Vector:
        powers = np.cumprod(np.full(4, theta))
        return y_old + h * ((K.T @ self.P) @ powers)


class _PIController:
    """PI step size control for a 5(4) pair."""
    beta = 0.04
    safety = 0.9
    min_factor = 0.2
    max_factor = 10.0

    def __init__(self):
        self.previous = 1e-4
        self.rejected_last = False

    def accept(self, h: float, err: float) -> float:
        err = max(err, 1e-10)
        expo = 1.0 / 5.0 - 0.75 * self.beta
        factor = self.safety * err ** (-expo) * self.previous ** self.beta
        factor = min(self.max_factor, max(self.min_factor, factor))
        if self.rejected_last:
            factor = min(factor, 1.0)
        self.previous = max(err, 1e-4)
        self.rejected_last = False
        return h * factor

    def reject(self, h: float, err: float) -> float:
        expo = 1.0 / 5.0 - 0.75 * self.beta
        factor = max(self.min_factor, self.safety * err ** (-expo))
        self.rejected_last = True
        return h * min(factor, 1.0)


def _error_norm(error: Vector, y: Vector, y_new: Vector, config: IntegratorConfig) -> float:
    scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


def _partial(grid_times: List[float], xs: List[Vector], vs: List[Vector], problem: Problem,
             params: Params, config: IntegratorConfig, counters: Dict[str, int],
             t: float) -> Optional[Trajectory]:
    if not grid_times:
        return None
    return Trajectory(
        times=np.array(grid_times), xs=np.array(xs), vs=np.array(vs),
        problem=problem, params=params, config=config,
        accepted_steps=counters['accepted'], rejected_steps=counters['rejected'],
        rhs_evals=counters['evals'], t_reached=t,
    )


def integrate(problem: Problem, params: Params, t_end: float,
              config: Optional[IntegratorConfig] = None) -> Trajectory:
    """
    Integrate the flow from params.t0 to t_end.

    Raises:
        ConfigurationError: if t_end <= t0 or the config is invalid
        StepBudgetExceeded: when max_rhs_evals is exhausted, carrying the
            partial trajectory and the time reached
        NonFiniteStateError: when the state stops being finite, carrying the
            last good state
        IntegrationError: when the step size underflows or a sample has
            g(x) - g_star below MIN_VALUE_GAP
    """
    config = config or IntegratorConfig()
    config.validate()
    check_structure(params, problem)
    t0 = float(params.t0)
    if not t_end > t0:
        raise ConfigurationError(f"t_end={t_end} must exceed t0={t0}")

    d = problem.dimension
    scheme = DormandPrince()
    counters = {'accepted': 0, 'rejected': 0, 'evals': 0}
    vector_field = make_vector_field(params, problem)

    def f(t: float, y: Vector) -> Vector:
        counters['evals'] += 1
        return vector_field(t, y)

    grid = log_grid(t0, t_end, config.sample_points_per_decade)
    grid_times: List[float] = [t0]
    xs: List[Vector] = [np.array(params.u0)]
    vs: List[Vector] = [np.array(params.v0)]
    next_index = 1

    t = t0
    y = np.concatenate((params.u0, params.v0))
    h, max_step = config.resolved_steps(t0, t_end)
    fixed_steps = None
    if config.fixed_step is not None:
        count = (t_end - t0) / config.fixed_step
        fixed_steps = int(round(count))
        if fixed_steps < 1 or abs(fixed_steps - count) > 1e-9 * max(1.0, count):
            raise ConfigurationError("fixed_step must divide the integration interval")
        h = config.fixed_step
    controller = _PIController()
    k1 = f(t, y)

    while t < t_end:
        if counters['evals'] >= config.max_rhs_evals:
            logger.error(f"Evaluation budget exhausted at t={t:.6g}")
            raise StepBudgetExceeded(
                f"max_rhs_evals={config.max_rhs_evals} exceeded at t={t:.6g}", t=t,
                state=FlowState(t=t, x=y[:d].copy(), v=y[d:].copy()),
                partial=_partial(grid_times, xs, vs, problem, params, config, counters, t),
            )
        if fixed_steps is not None:
            t_new = t0 + (counters['accepted'] + 1) * config.fixed_step
            if counters['accepted'] + 1 == fixed_steps:
                t_new = t_end
        else:
            h = min(h, max_step)
            if t + h >= t_end or t_end - (t + h) < 1e-12 * t_end:
                h = t_end - t
            t_new = t + h
            if h <= 1e-14 * abs(t):
                raise IntegrationError(
                    f"Step size underflow at t={t:.6g}", t=t,
                    state=FlowState(t=t, x=y[:d].copy(), v=y[d:].copy()),
                    partial=_partial(grid_times, xs, vs, problem, params, config, counters, t),
                )
        step = t_new - t
        try:
            y_new, error, K = scheme.step(f, t, y, step, k1)
        except NonFiniteStateError as e:
            e.state = FlowState(t=t, x=y[:d].copy(), v=y[d:].copy())
            e.partial = _partial(grid_times, xs, vs, problem, params, config, counters, t)
            raise

        if fixed_steps is None:
            err = _error_norm(error, y, y_new, config)
            if not np.isfinite(err) or err > 1.0:
                counters['rejected'] += 1
                h = controller.reject(step, err if np.isfinite(err) else 1e10)
                continue
            h = controller.accept(step, err)

        if not np.all(np.isfinite(y_new)):
            raise NonFiniteStateError(
                f"Non-finite state at t={t_new:.6g}", t=t,
                state=FlowState(t=t, x=y[:d].copy(), v=y[d:].copy()),
                partial=_partial(grid_times, xs, vs, problem, params, config, counters, t),
            )
        counters['accepted'] += 1

        while next_index < len(grid) and grid[next_index] <= t_new:
            sample_t = grid[next_index]
            if sample_t == t_new:
                sample = y_new
            else:
                sample = scheme.dense(K, y, step, (sample_t - t) / step)
            grid_times.append(float(sample_t))
            xs.append(sample[:d].copy())
            vs.append(sample[d:].copy())
            next_index += 1

        t, y, k1 = t_new, y_new, K[6]

    trajectory = _partial(grid_times, xs, vs, problem, params, config, counters, t)
    below = np.flatnonzero(trajectory.value_gap < MIN_VALUE_GAP)
    if below.size:
        index = int(below[0])
        logger.error(f"Value gap below the declared minimum on {problem} at t={trajectory.times[index]:.6g}")
        raise IntegrationError(
            f"g(x) - g_star = {trajectory.value_gap[index]:.3e} at t={trajectory.times[index]:.6g}",
            t=float(trajectory.times[index]), state=trajectory.state(index), partial=trajectory,
        )
    logger.info(
        f"Integrated {problem} to t={t:.6g}: {counters['accepted']} accepted, "
        f"{counters['rejected']} rejected, {counters['evals']} evaluations"
    )
    return trajectory


@dataclass
class SelfTestReport:
    """Maximum errors of the closed-form validation runs."""
    errors: Dict[str, float] = field(default_factory=dict)
    thresholds: Dict[str, float] = field(default_factory=dict)
    tolerance_trend: List[float] = field(default_factory=list)

    @property
    def trend_ok(self) -> bool:
        trend = self.tolerance_trend
        if len(trend) < 2:
            return False
        steps_ok = all(later <= 1.1 * earlier for earlier, later in zip(trend, trend[1:]))
        return steps_ok and trend[-1] < trend[0]

    @property
    def failures(self) -> List[str]:
        failed = [name for name, value in self.errors.items() if not value <= self.thresholds[name]]
        if not self.trend_ok:
            failed.append('tolerance_trend')
        return failed

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {f"{name}_max_error": value for name, value in self.errors.items()}
        out['tolerance_trend'] = ",".join(f"{value:.3e}" for value in self.tolerance_trend)
        out['passed'] = self.passed
        return out


def damped_linear_solution(t: Vector) -> Tuple[Vector, Vector]:
    """x(t) = (1 - t^-2)/2, x'(t) = t^-3: solution of x'' = -(3/t) x', x(1)=0, x'(1)=1."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (1.0 - t ** -2), t ** -3


def damped_linear_params() -> Params:
    return Params(alpha=3.0, q=1.0, a=0.0, p=1.0, t0=1.0, u0=[0.0], v0=[1.0])


def self_test(config: Optional[IntegratorConfig] = None) -> SelfTestReport:
    """
    Run the closed-form validation problems and report their maximum errors.

    The verdict is carried by `passed`; use require_self_test to raise instead.
    """
    config = config or IntegratorConfig()
    report = SelfTestReport()

    equilibrium = integrate(
        make_degenerate_quadratic(5.0, 1.0),
        Params(alpha=3.5, q=0.7, a=1.0, p=1.2, t0=1.0, u0=[0.0, 0.0], v0=[0.0, 0.0]),
        100.0, config,
    )
    report.errors['equilibrium'] = float(np.max(np.abs(np.hstack((equilibrium.xs, equilibrium.vs)))))
    report.thresholds['equilibrium'] = config.abs_tol

    linear = integrate(make_flat(1), damped_linear_params(), 100.0, config)
    x_exact, _ = damped_linear_solution(linear.times)
    report.errors['damped_linear'] = float(abs(linear.xs[-1, 0] - x_exact[-1]))
    report.thresholds['damped_linear'] = min(1e-8, 100.0 * config.rel_tol)

    shifted = make_shifted_quadratic([1.0])
    params = Params(alpha=3.0, q=1.0, a=0.0, p=1.0, t0=1.0, u0=[0.0], v0=[0.0])
    run = integrate(shifted, params, 100.0, config)
    reference_config = IntegratorConfig(
        rel_tol=1e-12, abs_tol=1e-14,
        sample_points_per_decade=config.sample_points_per_decade,
    )
    reference = integrate(shifted, params, 100.0, reference_config)
    report.errors['shifted_hbs'] = float(np.max(np.abs(run.xs - reference.xs)))
    report.thresholds['shifted_hbs'] = 100.0 * config.rel_tol

    for rel_tol in (1e-6, 5e-7, 2.5e-7):
        trial = integrate(make_flat(1), damped_linear_params(), 100.0,
                          IntegratorConfig(rel_tol=rel_tol, abs_tol=1e-14))
        report.tolerance_trend.append(float(abs(trial.xs[-1, 0] - x_exact[-1])))

    if report.passed:
        logger.info(f"Integrator self test passed: {report.to_dict()}")
    else:
        logger.error(f"Integrator self test failed: {report.failures}")
    return report


def require_self_test(config: Optional[IntegratorConfig] = None) -> SelfTestReport:
    """Run self_test and raise AcceptanceError if it fails."""
    report = self_test(config)
    if not report.passed:
        raise AcceptanceError(f"Integrator self test failed: {', '.join(report.failures)}")
    return report

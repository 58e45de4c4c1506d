"""
Tikhonov viscosity curve.

x_t is the unique minimizer of g_t(x) = g(x) + (a / 2 t^p) ||x||^2. It tends to
the minimal-norm minimizer x_star as t grows and never leaves the ball of
radius ||x_star||.
"""
from dataclasses import dataclass, field
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.exceptions import AcceptanceError, ValidationError
from app.newton import damped_newton
from app.problems import Problem

logger = logging.getLogger(__name__)

Vector = np.ndarray

RESIDUAL_TOL = 1e-10
NEWTON_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class TikhonovPoint:
    """One point of the curve with its stationarity residual."""
    t: float
    x_t: Vector
    residual: float
    solver_iterations: int


def weight(t: float, a: float, p: float) -> float:
    """Tikhonov coefficient a / t^p."""
    return a / t ** p


def regularized_value(problem: Problem, x: Vector, t: float, a: float, p: float) -> float:
    """g_t(x) = g(x) + (a / 2 t^p) ||x||^2."""
    x = np.asarray(x, dtype=float)
    return float(problem.objective(x)) + 0.5 * weight(t, a, p) * float(x @ x)


def _check_arguments(t: float, a: float, p: float) -> None:
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    if not a > 0:
        raise ValidationError(f"a must be positive for the Tikhonov curve, got {a}")
    if not p > 0:
        raise ValidationError(f"p must be positive, got {p}")


def tikhonov_point(problem: Problem, t: float, a: float, p: float,
                   warm_start: Optional[Vector] = None) -> TikhonovPoint:
    """
    Solve min g_t to residual 1e-10 (1 + a/t^p).

    Quadratic catalog members are solved in closed form; other members use
    damped Newton, started from warm_start when given.

    Raises:
        ValidationError: for non-positive t, a or p
        SolverError: if Newton fails, carrying the best residual
    """
    _check_arguments(t, a, p)
    lam = weight(t, a, p)
    identity = np.eye(problem.dimension)

    if problem.quadratic is not None:
        H, h = problem.quadratic
        x_t = np.linalg.solve(H + lam * identity, h)
        residual = float(np.linalg.norm(problem.gradient(x_t) + lam * x_t))
        return TikhonovPoint(t=float(t), x_t=x_t, residual=residual, solver_iterations=0)

    start = problem.x_star if warm_start is None else warm_start
    result = damped_newton(
        lambda x: regularized_value(problem, x, t, a, p),
        lambda x: problem.gradient(x) + lam * x,
        lambda x: problem.hessian(x) + lam * identity,
        np.array(start, dtype=float),
        tol=RESIDUAL_TOL * (1.0 + lam),
        max_iter=NEWTON_MAX_ITER,
    )
    return TikhonovPoint(t=float(t), x_t=result.x, residual=result.residual,
                         solver_iterations=result.iterations)


class TikhonovCurve:
    """
    Sequential evaluation of the curve with warm starts.

    Holds warm-start state: one instance per sweep, never shared between
    concurrent callers.
    """

    def __init__(self, problem: Problem, a: float, p: float):
        self.problem = problem
        self.a = a
        self.p = p
        self._last: Optional[Vector] = None

    def point(self, t: float) -> TikhonovPoint:
        point = tikhonov_point(self.problem, t, self.a, self.p, warm_start=self._last)
        self._last = point.x_t
        return point

    def sweep(self, grid: Sequence[float]) -> List[TikhonovPoint]:
        return [self.point(float(t)) for t in grid]


def shifted_curve_point(c: Vector, t: float, a: float, p: float) -> Vector:
    """Closed form x_t = c / (1 + a / (2 t^p)) for g = ||x - c||^2."""
    return np.asarray(c, dtype=float) / (1.0 + 0.5 * weight(t, a, p))


def shifted_curve_speed(c: Vector, t: float, a: float, p: float) -> float:
    """||d/dt x_t|| = ||c|| (a p / 2 t^(p+1)) / (1 + a / (2 t^p))^2 for g = ||x - c||^2."""
    u = 0.5 * weight(t, a, p)
    return float(np.linalg.norm(c)) * (a * p / (2.0 * t ** (p + 1))) / (1.0 + u) ** 2


@dataclass
class DerivativeCheckReport:
    """Finite-difference check of ||d/dt x_t|| <= (p/t) ||x_t||."""
    times: List[float] = field(default_factory=list)
    derivative_norms: List[float] = field(default_factory=list)
    bounds: List[float] = field(default_factory=list)
    slacks: List[float] = field(default_factory=list)

    @property
    def margins(self) -> np.ndarray:
        """bound + slack - derivative; negative means violated."""
        return np.array(self.bounds) + np.array(self.slacks) - np.array(self.derivative_norms)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= 0))

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins)) if self.times else 0.0


def curve_derivative_check(problem: Problem, a: float, p: float,
                           grid: Sequence[float]) -> DerivativeCheckReport:
    """
    Estimate d/dt x_t by central differences and check the growth bound.

    The slack at an interior node is 10 * h * ||second divided difference||
    with h the larger neighbouring spacing, plus a 1e-9 floor for solver noise.

    Raises:
        ValidationError: for a grid that is not strictly increasing or has
            fewer than 3 points
        SolverError: propagated from the curve solver
    """
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size < 3:
        raise ValidationError("Derivative check needs at least 3 grid points")
    if not np.all(np.diff(times) > 0):
        raise ValidationError("Derivative check grid must be strictly increasing")

    points = TikhonovCurve(problem, a, p).sweep(times)
    xs = np.array([point.x_t for point in points])
    report = DerivativeCheckReport()
    for i in range(1, len(times) - 1):
        left = times[i] - times[i - 1]
        right = times[i + 1] - times[i]
        derivative = (xs[i + 1] - xs[i - 1]) / (left + right)
        second = 2.0 * (
            (xs[i + 1] - xs[i]) / right - (xs[i] - xs[i - 1]) / left
        ) / (left + right)
        spacing = max(left, right)
        report.times.append(float(times[i]))
        report.derivative_norms.append(float(np.linalg.norm(derivative)))
        report.bounds.append(p / times[i] * float(np.linalg.norm(xs[i])))
        report.slacks.append(10.0 * spacing * float(np.linalg.norm(second)) + 1e-9)
    if not report.passed:
        logger.warning(f"Curve derivative bound violated, worst margin {report.worst_margin:.3e}")
    return report


@dataclass(frozen=True)
class GapDecomposition:
    """Strong convexity split of the regularized gap at a point."""
    g_t_gap: float
    strong_lower: float
    value_gap: float
    value_upper: float


def gap_decomposition(problem: Problem, x: Vector, t: float, a: float, p: float,
                      point: Optional[TikhonovPoint] = None) -> GapDecomposition:
    """
    Compute g_t(x) - g_t(x_t) and its lower bound (a / 2 t^p) ||x - x_t||^2.

    Also returns g(x) - g(x_star) and its upper bound
    g_t(x) - g_t(x_t) + (a / 2 t^p) ||x_star||^2.

    Raises:
        ValidationError: if x is not finite
        AcceptanceError: if the strong convexity bound fails beyond 1e-10
        SolverError: propagated from the curve solver
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("Gap decomposition needs a finite point")
    if point is None:
        point = tikhonov_point(problem, t, a, p)
    lam = weight(t, a, p)
    gap = regularized_value(problem, x, t, a, p) - regularized_value(problem, point.x_t, t, a, p)
    diff = x - point.x_t
    lower = 0.5 * lam * float(diff @ diff)
    if gap < lower - 1e-10:
        raise AcceptanceError(f"Regularized gap {gap:.6e} below strong convexity bound {lower:.6e}")
    x_star = problem.x_star
    return GapDecomposition(
        g_t_gap=gap,
        strong_lower=lower,
        value_gap=problem.value_gap(x),
        value_upper=gap + 0.5 * lam * float(x_star @ x_star),
    )

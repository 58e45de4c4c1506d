"""
Catalog of convex objectives with exact gradients.

Every Problem knows its optimal value and its minimal-norm minimizer, so the
dynamics and the diagnostics can measure errors exactly.
"""
from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from app.exceptions import SolverError, ValidationError
from app.newton import damped_newton

logger = logging.getLogger(__name__)

Vector = np.ndarray

LOGSUMEXP_TOLERANCE = 1e-10


def _frozen(values) -> Vector:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Problem:
    """A convex objective with its gradient oracle and known solution."""
    identifier: str
    dimension: int
    objective: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    hessian: Callable[[Vector], np.ndarray]
    g_star: float
    x_star: Vector
    argmin_description: str
    # Points of argmin g declared by the constructor, used for minimal-norm tests
    argmin_members: Tuple[Vector, ...] = field(default_factory=tuple)
    # (H, h) when the gradient is the affine map x -> H x - h
    quadratic: Optional[Tuple[np.ndarray, Vector]] = None

    def value_gap(self, x: Vector) -> float:
        """g(x) - g_star."""
        return float(self.objective(x)) - self.g_star

    def __str__(self) -> str:
        return self.identifier


def make_degenerate_quadratic(m: float, n: float) -> Problem:
    """
    Objective (m x + n y)^2 on the plane.

    Convex but not strongly convex; argmin is the line m x + n y = 0 and its
    minimal-norm element is the origin.
    """
    if m == 0 or n == 0:
        raise ValidationError("Degenerate quadratic needs m != 0 and n != 0")
    direction = _frozen([m, n])
    H = _frozen(2.0 * np.outer(direction, direction))
    h = _frozen([0.0, 0.0])

    def objective(x: Vector) -> float:
        return float(np.dot(direction, x)) ** 2

    def gradient(x: Vector) -> Vector:
        return 2.0 * float(np.dot(direction, x)) * direction

    def hessian(x: Vector) -> np.ndarray:
        return np.array(H)

    members = tuple(_frozen([s, -(m / n) * s]) for s in (-2.0, -1.0, 0.0, 1.0, 2.0))
    return Problem(
        identifier=f"quad:{m:g},{n:g}",
        dimension=2,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        g_star=0.0,
        x_star=_frozen([0.0, 0.0]),
        argmin_description=f"line {{(x, -({m:g}/{n:g}) x)}}",
        argmin_members=members,
        quadratic=(H, h),
    )


def make_shifted_quadratic(c: Sequence[float]) -> Problem:
    """Objective ||x - c||^2 with unique minimizer c."""
    center = _frozen(c)
    if center.ndim != 1 or center.size == 0:
        raise ValidationError("Shift vector must be a non-empty 1-d vector")
    if not np.all(np.isfinite(center)):
        raise ValidationError(f"Shift vector must be finite: {list(c)}")
    dimension = center.size
    H = _frozen(2.0 * np.eye(dimension))
    h = _frozen(2.0 * center)

    def objective(x: Vector) -> float:
        diff = np.asarray(x, dtype=float) - center
        return float(diff @ diff)

    def gradient(x: Vector) -> Vector:
        return 2.0 * (np.asarray(x, dtype=float) - center)

    def hessian(x: Vector) -> np.ndarray:
        return np.array(H)

    label = ",".join(f"{value:g}" for value in center)
    return Problem(
        identifier=f"shifted:{label}",
        dimension=dimension,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        g_star=0.0,
        x_star=center,
        argmin_description=f"single point ({label})",
        argmin_members=(center,),
        quadratic=(H, h),
    )


def make_flat(dimension: int = 1) -> Problem:
    """Zero objective; every point minimizes it, the origin has minimal norm."""
    if dimension < 1:
        raise ValidationError("dimension must be at least 1")
    zero = _frozen(np.zeros(dimension))

    def objective(x: Vector) -> float:
        return 0.0

    def gradient(x: Vector) -> Vector:
        return np.zeros(dimension)

    def hessian(x: Vector) -> np.ndarray:
        return np.zeros((dimension, dimension))

    return Problem(
        identifier=f"flat:{dimension}",
        dimension=dimension,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        g_star=0.0,
        x_star=zero,
        argmin_description="whole space",
        argmin_members=(zero, _frozen(np.ones(dimension))),
        quadratic=(_frozen(np.zeros((dimension, dimension))), zero),
    )


def make_logsumexp(
    A: Sequence[Sequence[float]],
    b: Sequence[float],
    regularizer_shift: Optional[Sequence[float]] = None,
    identifier: Optional[str] = None,
) -> Problem:
    """
    Objective log sum_i exp(A_i (x - s) + b_i).

    The minimizer is found once by a damped Newton oracle and frozen into
    the returned Problem.

    Raises:
        ValidationError: on inconsistent or non-finite data
        SolverError: if the oracle cannot reach LOGSUMEXP_TOLERANCE, which
            happens when the objective is unbounded below
    """
    matrix = _frozen(A)
    offsets = _frozen(b)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise ValidationError("A must be a non-empty matrix")
    if offsets.shape != (matrix.shape[0],):
        raise ValidationError(f"b must have {matrix.shape[0]} entries")
    if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(offsets))):
        raise ValidationError("A and b must have finite entries")
    dimension = matrix.shape[1]
    shift = _frozen(np.zeros(dimension) if regularizer_shift is None else regularizer_shift)
    if shift.shape != (dimension,):
        raise ValidationError(f"regularizer_shift must have {dimension} entries")

    def _scores(x: Vector) -> Vector:
        return matrix @ (np.asarray(x, dtype=float) - shift) + offsets

    def objective(x: Vector) -> float:
        return float(logsumexp(_scores(x)))

    def gradient(x: Vector) -> Vector:
        return matrix.T @ softmax(_scores(x))

    def hessian(x: Vector) -> np.ndarray:
        w = softmax(_scores(x))
        return matrix.T @ (np.diag(w) - np.outer(w, w)) @ matrix

    try:
        result = damped_newton(
            objective, gradient, hessian, np.array(shift),
            tol=LOGSUMEXP_TOLERANCE, max_iter=200,
        )
    except SolverError as e:
        raise SolverError(
            f"log-sum-exp objective has no computable minimizer: {e}",
            best_residual=e.best_residual,
        ) from e
    x_star = _frozen(result.x)
    name = identifier or f"logsumexp:{matrix.shape[0]}x{dimension}"
    logger.info(f"{name}: minimizer found in {result.iterations} Newton iterations")
    return Problem(
        identifier=name,
        dimension=dimension,
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        g_star=objective(x_star),
        x_star=x_star,
        argmin_description=f"single point, Newton oracle tolerance {LOGSUMEXP_TOLERANCE:g}",
        argmin_members=(x_star,),
    )


LOGSUMEXP_PRESETS: Dict[int, Tuple[list, list]] = {
    1: ([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0, 0.0, 0.0, 0.0]),
    2: ([[1.0, 2.0], [-1.0, 0.0], [0.0, -1.0]], [0.0, 0.5, -0.5]),
    3: ([[1.0], [-2.0]], [0.0, 1.0]),
}


def _parse_floats(text: str) -> list:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ValidationError(f"Invalid number list: {text}") from e


def _build_quad(arguments: str) -> Problem:
    values = _parse_floats(arguments)
    if len(values) != 2:
        raise ValidationError(f"quad expects two numbers m,n: {arguments}")
    return make_degenerate_quadratic(*values)


def _build_shifted(arguments: str) -> Problem:
    return make_shifted_quadratic(_parse_floats(arguments))


def _build_flat(arguments: str) -> Problem:
    try:
        return make_flat(int(arguments or '1'))
    except ValueError as e:
        raise ValidationError(f"flat expects an integer dimension: {arguments}") from e


def _build_logsumexp(arguments: str) -> Problem:
    preset = arguments.strip().lower()
    if not preset.startswith("preset-"):
        raise ValidationError(f"logsumexp expects preset-k: {arguments}")
    try:
        key = int(preset[len("preset-"):])
        A, b = LOGSUMEXP_PRESETS[key]
    except (ValueError, KeyError) as e:
        raise ValidationError(f"Unknown logsumexp preset: {arguments}") from e
    return make_logsumexp(A, b, identifier=f"logsumexp:preset-{key}")


# Factory Method
class ProblemFactory:
    """Creates catalog problems from string identifiers such as 'quad:5,1'."""
    _builders: Dict[str, Callable[[str], Problem]] = {
        'quad': _build_quad,
        'shifted': _build_shifted,
        'logsumexp': _build_logsumexp,
        'flat': _build_flat,
    }

    @classmethod
    def register(cls, name: str, builder: Callable[[str], Problem]) -> None:
        """
        Register a new problem family.

        Arguments:
            name: prefix used in identifiers
            builder: callable receiving the text after ':' and returning a Problem
        """
        if not callable(builder):
            raise TypeError("Problem builder must be callable")
        cls._builders[name.lower()] = builder

    @classmethod
    def create(cls, identifier: str) -> Problem:
        """
        Create a problem from its identifier.

        Raises:
            ValidationError: if the family is unknown or the arguments are invalid
        """
        name, _, arguments = identifier.strip().partition(":")
        builder = cls._builders.get(name.lower())
        if not builder:
            raise ValidationError(f"Unknown problem: {identifier}")
        return builder(arguments)

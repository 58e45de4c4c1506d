"""
Right-hand side of the inertial flow with vanishing damping and Tikhonov term.

    x'' + (alpha / t^q) x' + grad g(x) + (a / t^p) x = 0

written as the first order system x' = v, v' = -(alpha/t^q) v - grad g(x) - (a/t^p) x.
"""
from dataclasses import dataclass, field, replace
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.exceptions import NonFiniteStateError, ValidationError
from app.problems import Problem

logger = logging.getLogger(__name__)

Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class Params:
    """Flow coefficients and initial data."""
    alpha: float
    q: float
    a: float
    p: float
    t0: float
    u0: Vector
    v0: Vector

    def __post_init__(self):
        object.__setattr__(self, 'u0', np.array(self.u0, dtype=float))
        object.__setattr__(self, 'v0', np.array(self.v0, dtype=float))

    def with_value(self, name: str, value: float) -> 'Params':
        """Copy with one coefficient replaced (used by sweeps)."""
        if name not in ('alpha', 'q', 'a', 'p', 't0'):
            raise ValidationError(f"Cannot vary parameter: {name}")
        return replace(self, **{name: float(value)})

    def to_dict(self) -> dict:
        return {
            'alpha': self.alpha, 'q': self.q, 'a': self.a, 'p': self.p, 't0': self.t0,
            'u0': self.u0.tolist(), 'v0': self.v0.tolist(),
        }


@dataclass(frozen=True, eq=False)
class FlowState:
    """One state of the first order system."""
    t: float
    x: Vector
    v: Vector

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.t) and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True, eq=False)
class ValidatedParams:
    """Params that passed structural validation, annotated with their regime."""
    params: Params
    regime_id: str
    outside_guarantees: bool
    notes: List[str] = field(default_factory=list)


def check_structure(params: Params, problem: Optional[Problem] = None) -> None:
    """
    Raise ValidationError for structurally invalid coefficients.

    Arguments:
        params: coefficients and initial data
        problem: if given, initial data dimensions are checked against it
    """
    values = (params.alpha, params.q, params.a, params.p, params.t0)
    if not all(np.isfinite(values)):
        raise ValidationError("Flow coefficients must be finite")
    if params.t0 <= 0:
        raise ValidationError("t0 must be positive")
    if params.alpha <= 0:
        raise ValidationError("alpha must be positive")
    if not 0 < params.q <= 1:
        raise ValidationError("q must lie in (0, 1]")
    if params.p <= 0:
        raise ValidationError("p must be positive")
    if params.a < 0:
        raise ValidationError("a must be non-negative")
    if params.u0.ndim != 1 or params.u0.shape != params.v0.shape:
        raise ValidationError("u0 and v0 must be vectors of equal dimension")
    if not (np.all(np.isfinite(params.u0)) and np.all(np.isfinite(params.v0))):
        raise ValidationError("Initial data must be finite")
    if problem is not None and params.u0.size != problem.dimension:
        raise ValidationError(
            f"Initial data has dimension {params.u0.size}, problem {problem} has {problem.dimension}"
        )


def validate(params: Params, problem: Optional[Problem] = None) -> ValidatedParams:
    """
    Validate params and annotate the regime they fall into.

    Values are never altered. Params outside every covered regime are accepted
    with an outside-guarantees annotation.

    Raises:
        ValidationError: for structurally invalid inputs only
    """
    check_structure(params, problem)
    from app.regimes import OUTSIDE, classify_regime
    report = classify_regime(params)
    notes = [f"{name}: {'ok' if ok else 'violated'}" for name, ok in report.hypotheses_checked]
    outside = report.regime_id == OUTSIDE
    if outside:
        logger.warning(f"Parameters outside every covered regime: {params.to_dict()}")
    return ValidatedParams(params=params, regime_id=report.regime_id, outside_guarantees=outside, notes=notes)


def make_vector_field(params: Params, problem: Problem) -> Callable[[float, Vector], Vector]:
    """
    Stacked vector field f(t, y) with y = (x, v), used by the integrator.

    Raises NonFiniteStateError when the gradient output is not finite.
    """
    d = problem.dimension
    alpha, q, a, p = params.alpha, params.q, params.a, params.p
    gradient = problem.gradient

    def field_(t: float, y: Vector) -> Vector:
        x = y[:d]
        v = y[d:]
        grad = gradient(x)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteStateError(f"Non-finite gradient at t={t!r}", t=t)
        dv = -(alpha / t ** q) * v - grad
        if a != 0:
            dv = dv - (a / t ** p) * x
        return np.concatenate((v, dv))

    return field_


def rhs(state: FlowState, params: Params, problem: Problem) -> Tuple[Vector, Vector]:
    """
    Evaluate (dx, dv) at a state.

    Raises:
        ValidationError: if state.t precedes params.t0
        NonFiniteStateError: if the gradient is not finite
    """
    if state.t < params.t0:
        raise ValidationError(f"State time {state.t} precedes t0={params.t0}")
    y = np.concatenate((np.asarray(state.x, dtype=float), np.asarray(state.v, dtype=float)))
    out = make_vector_field(params, problem)(state.t, y)
    d = problem.dimension
    return out[:d], out[d:]


def residual(state: FlowState, dv: Vector, params: Params, problem: Problem) -> float:
    """Norm of dv + (alpha/t^q) v + grad g(x) + (a/t^p) x."""
    t = state.t
    r = dv + (params.alpha / t ** params.q) * state.v + problem.gradient(state.x) \
        + (params.a / t ** params.p) * state.x
    return float(np.linalg.norm(r))


def initial_state(params: Params) -> FlowState:
    return FlowState(t=params.t0, x=np.array(params.u0), v=np.array(params.v0))

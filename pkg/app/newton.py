"""
Damped Newton method with Armijo backtracking.

Shared by the log-sum-exp catalog oracle and the Tikhonov curve solver.
"""
from dataclasses import dataclass
import logging
from typing import Callable

import numpy as np

from app.exceptions import SolverError

logger = logging.getLogger(__name__)

Vector = np.ndarray


@dataclass(frozen=True)
class NewtonResult:
    """Outcome of a converged Newton solve."""
    x: Vector
    residual: float
    iterations: int


def damped_newton(
    fun: Callable[[Vector], float],
    grad: Callable[[Vector], Vector],
    hess: Callable[[Vector], np.ndarray],
    x0: Vector,
    tol: float = 1e-10,
    max_iter: int = 100,
    armijo: float = 1e-4,
    max_halvings: int = 60,
) -> NewtonResult:
    """
    Minimize a smooth convex function by Newton steps with backtracking.

    Arguments:
        fun, grad, hess: objective, gradient and Hessian oracles
        x0: starting point (warm start)
        tol: stopping tolerance on the gradient norm
        max_iter: Newton iteration cap

    Returns:
        NewtonResult with the minimizer, its gradient norm and the iteration count

    Raises:
        SolverError: if the tolerance is not reached within max_iter, carrying
            the best residual seen
    """
    x = np.array(x0, dtype=float)
    g = grad(x)
    residual = float(np.linalg.norm(g))
    best = residual
    for iteration in range(max_iter + 1):
        if not np.isfinite(residual):
            break
        if residual <= tol:
            return NewtonResult(x=x, residual=residual, iterations=iteration)
        if iteration == max_iter:
            break
        H = hess(x)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -g, rcond=None)[0]
        slope = float(g @ step)
        if not np.isfinite(slope) or slope >= 0.0:
            # Singular direction, fall back to steepest descent
            step = -g
            slope = -residual ** 2
        f0 = fun(x)
        lam = 1.0
        for _ in range(max_halvings):
            candidate = x + lam * step
            f1 = fun(candidate)
            if f1 <= f0 + armijo * lam * slope:
                break
            g1 = grad(candidate)
            # Near the solution f differences drown in rounding
            if np.linalg.norm(g1) < 0.5 * residual:
                break
            lam *= 0.5
        x = candidate
        g = grad(x)
        residual = float(np.linalg.norm(g))
        best = min(best, residual)
    logger.warning(f"Newton failed to converge, best residual {best:.3e}")
    raise SolverError(
        f"Newton did not reach tolerance {tol:.1e} in {max_iter} iterations "
        f"(best residual {best:.3e})",
        best_residual=best,
    )

"""
Unit tests for the Tikhonov curve, its derivative bound and the gap split.
"""

import numpy as np
import pytest

from app.exceptions import AcceptanceError, ValidationError
from app.integrator import log_grid
from app.problems import ProblemFactory, make_degenerate_quadratic, make_shifted_quadratic
from app.tikhonov import (
    TikhonovCurve,
    TikhonovPoint,
    curve_derivative_check,
    gap_decomposition,
    regularized_value,
    shifted_curve_point,
    shifted_curve_speed,
    tikhonov_point,
    weight,
)

CATALOG = ["quad:5,1", "shifted:2,0", "logsumexp:preset-1", "logsumexp:preset-2", "logsumexp:preset-3"]


@pytest.fixture
def shifted():
    return make_shifted_quadratic([2.0, 0.0])


def test_degenerate_quadratic_curve_is_origin():
    """Test that the origin solves every regularized problem of (5x + y)^2."""
    quad = make_degenerate_quadratic(5, 1)
    for t in (1.0, 10.0, 1e4):
        point = tikhonov_point(quad, t, 1.0, 1.2)
        np.testing.assert_array_equal(point.x_t, [0.0, 0.0])
        assert point.residual == 0.0


def test_shifted_closed_form(shifted):
    """Test x_t = c / (1 + a / (2 t^p)) at t=10, a=1, p=2."""
    point = tikhonov_point(shifted, 10.0, 1.0, 2.0)
    np.testing.assert_allclose(point.x_t, [1.990049751243781, 0.0], atol=1e-9)
    np.testing.assert_allclose(point.x_t, shifted_curve_point([2.0, 0.0], 10.0, 1.0, 2.0), atol=1e-12)


def test_shifted_curve_approaches_minimizer(shifted):
    """Test that ||x_t - x*|| strictly decreases along t = 10, 100, 1000."""
    distances = [
        np.linalg.norm(tikhonov_point(shifted, t, 1.0, 2.0).x_t - shifted.x_star)
        for t in (10.0, 100.0, 1000.0)
    ]
    assert distances[0] > distances[1] > distances[2] > 0


@pytest.mark.parametrize("identifier", CATALOG)
def test_curve_invariants_on_catalog(identifier):
    """Test stationarity, the norm bound and the approach to x* on a log grid."""
    problem = ProblemFactory.create(identifier)
    grid = log_grid(1.0, 1e6, 10)
    points = TikhonovCurve(problem, 1.0, 1.0).sweep(grid)
    norm_star = np.linalg.norm(problem.x_star)
    distances = []
    for point in points:
        lam = weight(point.t, 1.0, 1.0)
        assert point.residual <= 1e-10 * (1.0 + lam)
        assert np.linalg.norm(point.x_t) <= norm_star + 1e-10
        distances.append(np.linalg.norm(point.x_t - problem.x_star))
    if problem.quadratic is not None:
        assert np.all(np.diff(distances) <= 1e-9)
    else:
        # Only the limit is guaranteed off the quadratic family
        assert distances[-1] <= distances[0]


@pytest.mark.parametrize("identifier", CATALOG)
def test_curve_converges_to_minimal_norm_minimizer(identifier):
    """Test ||x_t - x*|| < 1e-6 at t = 1e6 with p = 2."""
    problem = ProblemFactory.create(identifier)
    point = tikhonov_point(problem, 1e6, 1.0, 2.0)
    assert np.linalg.norm(point.x_t - problem.x_star) < 1e-6


@pytest.mark.parametrize("t", [2.0, 10.0, 100.0])
def test_shifted_analytic_speed_within_bound(t):
    """Test ||d/dt x_t|| <= (p/t) ||x_t|| from the closed form."""
    c = np.array([2.0, 0.0])
    speed = shifted_curve_speed(c, t, 1.0, 2.0)
    bound = 2.0 / t * np.linalg.norm(shifted_curve_point(c, t, 1.0, 2.0))
    assert 0 < speed <= bound


def test_shifted_analytic_speed_matches_differences():
    """Test the closed-form derivative against a central difference."""
    c = np.array([2.0, 0.0])
    h = 1e-4
    numeric = (shifted_curve_point(c, 10.0 + h, 1.0, 2.0) - shifted_curve_point(c, 10.0 - h, 1.0, 2.0)) / (2 * h)
    assert np.linalg.norm(numeric) == pytest.approx(shifted_curve_speed(c, 10.0, 1.0, 2.0), rel=1e-6)


@pytest.mark.parametrize("identifier", CATALOG)
def test_derivative_check_on_catalog(identifier):
    """Test the growth bound by finite differences on [1, 1000], 50 points per decade."""
    problem = ProblemFactory.create(identifier)
    report = curve_derivative_check(problem, 1.0, 2.0, log_grid(1.0, 1000.0, 50))
    assert report.passed, report.worst_margin
    assert len(report.times) == 149


def test_derivative_check_constant_curve():
    """Test that the degenerate quadratic has a zero derivative."""
    report = curve_derivative_check(make_degenerate_quadratic(5, 1), 1.0, 1.2, [1.0, 2.0, 3.0, 4.0])
    assert report.derivative_norms == [0.0, 0.0]
    assert report.passed


@pytest.mark.parametrize("grid", [[1.0, 2.0], [1.0, 3.0, 2.0]])
def test_derivative_check_rejects_bad_grids(shifted, grid):
    """Test that short or unsorted grids raise ValidationError."""
    with pytest.raises(ValidationError):
        curve_derivative_check(shifted, 1.0, 2.0, grid)


@pytest.mark.parametrize("t, a, p", [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)])
def test_tikhonov_point_rejects_invalid_arguments(shifted, t, a, p):
    """Test that t, a and p must be positive."""
    with pytest.raises(ValidationError, match="must be positive"):
        tikhonov_point(shifted, t, a, p)


def test_gap_decomposition_hand_values():
    """Test quad(5,1) at x=(1,1), t=1, a=1, p=1.2: gap 37 and bound 1."""
    quad = make_degenerate_quadratic(5, 1)
    split = gap_decomposition(quad, np.array([1.0, 1.0]), 1.0, 1.0, 1.2)
    assert split.g_t_gap == pytest.approx(37.0)
    assert split.strong_lower == pytest.approx(1.0)
    assert split.value_gap == pytest.approx(36.0)
    assert split.value_upper == pytest.approx(37.0)


def test_gap_decomposition_at_curve_point(shifted):
    """Test that x = x_t gives a zero gap and a zero bound."""
    point = tikhonov_point(shifted, 5.0, 1.0, 1.5)
    split = gap_decomposition(shifted, point.x_t, 5.0, 1.0, 1.5, point=point)
    assert split.g_t_gap == pytest.approx(0.0, abs=1e-14)
    assert split.strong_lower == 0.0


def test_gap_decomposition_fuzz():
    """Test the strong convexity bound and the value bound on 1000 random cases."""
    rng = np.random.default_rng(7)
    problems = [ProblemFactory.create(identifier) for identifier in CATALOG]
    for _ in range(1000):
        problem = problems[rng.integers(len(problems))]
        x = rng.normal(scale=2.0, size=problem.dimension)
        t = 10.0 ** rng.uniform(0.0, 3.0)
        a = rng.uniform(0.1, 2.0)
        p = rng.uniform(0.1, 2.0)
        split = gap_decomposition(problem, x, t, a, p)
        assert split.g_t_gap >= split.strong_lower - 1e-10
        assert split.value_gap <= split.value_upper + 1e-9


def test_gap_decomposition_rejects_non_finite_point(shifted):
    """Test that a non-finite x raises ValidationError."""
    with pytest.raises(ValidationError, match="finite"):
        gap_decomposition(shifted, np.array([np.nan, 0.0]), 1.0, 1.0, 1.0)


def test_gap_decomposition_detects_inconsistent_curve_point(shifted):
    """Test that a wrong curve point breaking the bound raises AcceptanceError."""
    wrong = TikhonovPoint(t=1.0, x_t=np.array([5.0, 5.0]), residual=0.0, solver_iterations=0)
    with pytest.raises(AcceptanceError, match="below strong convexity bound"):
        gap_decomposition(shifted, np.array([2.0, 0.0]), 1.0, 1.0, 1.0, point=wrong)


def test_regularized_value(shifted):
    """Test g_t(x) = g(x) + (a / 2 t^p) ||x||^2."""
    assert regularized_value(shifted, np.array([0.0, 1.0]), 2.0, 4.0, 1.0) == pytest.approx(5.0 + 1.0)

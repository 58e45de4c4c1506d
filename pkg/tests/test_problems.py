"""
Unit tests for the problem catalog and ProblemFactory.
"""

import math

import numpy as np
import pytest

from app.exceptions import SolverError, ValidationError
from app.problems import (
    Problem,
    ProblemFactory,
    make_degenerate_quadratic,
    make_flat,
    make_logsumexp,
    make_shifted_quadratic,
)


def test_degenerate_quadratic_values():
    """Test objective, gradient and solution of (5x + y)^2."""
    problem = make_degenerate_quadratic(5, 1)
    x = np.array([1.0, 1.0])
    assert problem.objective(x) == 36.0
    np.testing.assert_array_equal(problem.gradient(x), [60.0, 12.0])
    np.testing.assert_array_equal(problem.x_star, [0.0, 0.0])
    assert problem.g_star == 0.0
    assert problem.identifier == "quad:5,1"
    assert str(problem) == "quad:5,1"


def test_degenerate_quadratic_argmin_line():
    """Test that every declared argmin member minimizes and the origin has the smallest norm."""
    problem = make_degenerate_quadratic(5, 1)
    assert problem.value_gap(np.array([1.0, -5.0])) == 0.0
    norms = [np.linalg.norm(member) for member in problem.argmin_members]
    for member in problem.argmin_members:
        assert problem.objective(member) == pytest.approx(0.0, abs=1e-12)
    assert min(norms) == np.linalg.norm(problem.x_star)


@pytest.mark.parametrize("m, n", [(0, 1), (5, 0)])
def test_degenerate_quadratic_rejects_zero_coefficients(m, n):
    """Test that m=0 or n=0 is refused."""
    with pytest.raises(ValidationError, match="m != 0 and n != 0"):
        make_degenerate_quadratic(m, n)


def test_degenerate_quadratic_hessian_is_constant():
    """Test that the Hessian matches the affine gradient map."""
    problem = make_degenerate_quadratic(5, 1)
    H, h = problem.quadratic
    x = np.array([0.3, -2.0])
    np.testing.assert_allclose(problem.gradient(x), H @ x - h)
    np.testing.assert_allclose(problem.hessian(x), [[50.0, 10.0], [10.0, 2.0]])


def test_shifted_quadratic():
    """Test ||x - c||^2 with c=(2,0)."""
    problem = make_shifted_quadratic([2.0, 0.0])
    np.testing.assert_array_equal(problem.x_star, [2.0, 0.0])
    assert problem.objective(np.zeros(2)) == 4.0
    np.testing.assert_array_equal(problem.gradient(np.zeros(2)), [-4.0, 0.0])
    assert problem.identifier == "shifted:2,0"


def test_shifted_quadratic_rejects_non_finite_shift():
    """Test that a non-finite shift is refused."""
    with pytest.raises(ValidationError, match="finite"):
        make_shifted_quadratic([1.0, math.nan])


def test_flat_problem():
    """Test the zero objective used by the integrator self test."""
    problem = make_flat(3)
    assert problem.dimension == 3
    assert problem.objective(np.ones(3)) == 0.0
    np.testing.assert_array_equal(problem.gradient(np.ones(3)), np.zeros(3))
    np.testing.assert_array_equal(problem.x_star, np.zeros(3))


def test_logsumexp_axis_preset():
    """Test that the symmetric preset is minimized at the origin with value log 4."""
    problem = ProblemFactory.create("logsumexp:preset-1")
    np.testing.assert_allclose(problem.x_star, [0.0, 0.0], atol=1e-10)
    assert problem.g_star == pytest.approx(math.log(4.0), abs=1e-12)
    assert np.linalg.norm(problem.gradient(problem.x_star)) <= 1e-10


def test_logsumexp_one_dimensional_preset():
    """Test log(e^x + e^(1-2x)), minimized at (1 + ln 2) / 3."""
    problem = ProblemFactory.create("logsumexp:preset-3")
    assert problem.x_star[0] == pytest.approx((1.0 + math.log(2.0)) / 3.0, abs=1e-9)


def test_logsumexp_shift_translates_minimizer():
    """Test that the regularizer shift moves the minimizer and keeps the optimal value."""
    A = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    b = [0.0, 0.0, 0.0, 0.0]
    shifted = make_logsumexp(A, b, regularizer_shift=[1.0, -2.0])
    np.testing.assert_allclose(shifted.x_star, [1.0, -2.0], atol=1e-9)
    assert shifted.g_star == pytest.approx(math.log(4.0), abs=1e-12)


def test_logsumexp_hessian_matches_gradient_differences():
    """Test the analytic Hessian against central differences of the gradient."""
    problem = ProblemFactory.create("logsumexp:preset-2")
    x = np.array([0.2, -0.4])
    h = 1e-6
    numeric = np.column_stack([
        (problem.gradient(x + h * e) - problem.gradient(x - h * e)) / (2 * h)
        for e in np.eye(2)
    ])
    np.testing.assert_allclose(problem.hessian(x), numeric, atol=1e-7)


def test_logsumexp_unbounded_raises_solver_error():
    """Test that a single-row objective (unbounded below) raises SolverError."""
    with pytest.raises(SolverError, match="no computable minimizer"):
        make_logsumexp([[1.0]], [0.0])


def test_logsumexp_rejects_inconsistent_offsets():
    """Test that b must have one entry per row."""
    with pytest.raises(ValidationError, match="b must have 2 entries"):
        make_logsumexp([[1.0], [-1.0]], [0.0])


def test_problem_arrays_are_read_only():
    """Test that the minimizer of a problem cannot be mutated."""
    problem = make_shifted_quadratic([1.0])
    with pytest.raises(ValueError):
        problem.x_star[0] = 3.0


def test_factory_creates_known_problems():
    """Test that identifiers map to the right constructors."""
    assert ProblemFactory.create("quad:5,1").dimension == 2
    assert ProblemFactory.create("shifted:1,2,3").dimension == 3
    assert ProblemFactory.create("flat:2").identifier == "flat:2"


def test_factory_unknown_problem():
    """Test that an unknown family raises ValidationError."""
    with pytest.raises(ValidationError, match="Unknown problem: cubic:1"):
        ProblemFactory.create("cubic:1")


@pytest.mark.parametrize("identifier", ["quad:5", "quad:a,b", "logsumexp:preset-9", "logsumexp:7"])
def test_factory_invalid_arguments(identifier):
    """Test that malformed arguments raise ValidationError."""
    with pytest.raises(ValidationError):
        ProblemFactory.create(identifier)


def test_factory_register():
    """Test registering a new problem family."""
    def build(arguments):
        return make_shifted_quadratic([float(arguments)])

    ProblemFactory.register("line", build)
    try:
        problem = ProblemFactory.create("line:4")
        assert isinstance(problem, Problem)
        assert problem.x_star[0] == 4.0
    finally:
        ProblemFactory._builders.pop("line", None)


def test_factory_register_requires_callable():
    """Test that registering a non-callable builder raises TypeError."""
    with pytest.raises(TypeError, match="must be callable"):
        ProblemFactory.register("broken", "not a function")


CATALOG = ["quad:5,1", "shifted:2,0", "shifted:1,2,3", "flat:2",
           "logsumexp:preset-1", "logsumexp:preset-2", "logsumexp:preset-3"]


@pytest.fixture(scope="module", params=CATALOG)
def catalog_problem(request):
    return ProblemFactory.create(request.param)


def random_points(dimension, count=100, seed=7):
    return np.random.default_rng(seed).uniform(-10.0, 10.0, size=(count, dimension))


def test_gradient_matches_central_differences(catalog_problem):
    """Test the gradient against central differences at 100 points of [-10, 10]^d."""
    h = 1e-5
    basis = np.eye(catalog_problem.dimension)
    for x in random_points(catalog_problem.dimension):
        numeric = np.array([
            (catalog_problem.objective(x + h * e) - catalog_problem.objective(x - h * e)) / (2 * h)
            for e in basis
        ])
        analytic = catalog_problem.gradient(x)
        assert np.linalg.norm(numeric - analytic) <= 1e-6 * max(1.0, np.linalg.norm(analytic))


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_convexity_along_random_segments(catalog_problem, lam):
    """Test g(lam x + (1 - lam) y) <= lam g(x) + (1 - lam) g(y) on 100 random pairs."""
    xs = random_points(catalog_problem.dimension, seed=11)
    ys = random_points(catalog_problem.dimension, seed=13)
    g = catalog_problem.objective
    for x, y in zip(xs, ys):
        assert g(lam * x + (1 - lam) * y) <= lam * g(x) + (1 - lam) * g(y) + 1e-12


def test_values_never_below_declared_minimum(catalog_problem):
    """Test g(x) >= g_star - 1e-12 at random points and at x_star."""
    for x in random_points(catalog_problem.dimension, seed=17):
        assert catalog_problem.objective(x) >= catalog_problem.g_star - 1e-12
    assert catalog_problem.value_gap(catalog_problem.x_star) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(catalog_problem.gradient(catalog_problem.x_star)) <= 1e-10

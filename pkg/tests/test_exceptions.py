"""
Unit tests for the custom exception classes in exceptions.py.
"""

import pytest

from app.exceptions import (
    AcceptanceError,
    ConfigurationError,
    FlowError,
    IntegrationError,
    NonFiniteStateError,
    SolverError,
    StepBudgetExceeded,
    ValidationError,
)


def test_flow_error():
    """Test that FlowError can be raised and caught."""
    with pytest.raises(FlowError) as exc_info:
        raise FlowError("Flow error occurred")
    assert str(exc_info.value) == "Flow error occurred"


def test_validation_error():
    """Test that ValidationError can be raised and caught."""
    with pytest.raises(ValidationError) as exc_info:
        raise ValidationError("q must lie in (0, 1]")
    assert str(exc_info.value) == "q must lie in (0, 1]"
    assert isinstance(exc_info.value, FlowError)


def test_configuration_error():
    """Test that ConfigurationError can be raised and caught."""
    with pytest.raises(ConfigurationError) as exc_info:
        raise ConfigurationError("max_workers must be a positive integer")
    assert str(exc_info.value) == "max_workers must be a positive integer"
    assert isinstance(exc_info.value, FlowError)


def test_integration_error_carries_progress():
    """Test that IntegrationError keeps the time reached, state and partial trajectory."""
    with pytest.raises(IntegrationError) as exc_info:
        raise IntegrationError("Step size underflow", t=12.5, state="state", partial="partial")
    assert exc_info.value.t == 12.5
    assert exc_info.value.state == "state"
    assert exc_info.value.partial == "partial"


def test_integration_error_defaults():
    """Test that state and partial default to None."""
    error = StepBudgetExceeded("budget", t=3.0)
    assert error.state is None
    assert error.partial is None


def test_solver_error_best_residual():
    """Test that SolverError carries the best residual reached."""
    error = SolverError("no convergence", best_residual=1e-3)
    assert error.best_residual == 1e-3
    assert SolverError("no convergence").best_residual is None


def test_inheritance():
    """Test the inheritance hierarchy of custom exceptions."""
    assert issubclass(ValidationError, FlowError)
    assert issubclass(ConfigurationError, FlowError)
    assert issubclass(IntegrationError, FlowError)
    assert issubclass(StepBudgetExceeded, IntegrationError)
    assert issubclass(NonFiniteStateError, IntegrationError)
    assert issubclass(SolverError, FlowError)
    assert issubclass(AcceptanceError, FlowError)
    assert issubclass(FlowError, Exception)

"""
Custom exception classes for the flow simulator.

This module defines the exceptions used throughout the application,
providing a clear hierarchy and specific error handling.
"""
from typing import Any, Optional


class FlowError(Exception):
    """Parent class for flow simulator exception handling."""
    pass

class ValidationError(FlowError): #Polymorphism/Inheritance
    """Raised when input validation fails."""
    pass

class ConfigurationError(FlowError):
    """Raised when a configuration is invalid."""
    pass

class IntegrationError(FlowError):
    """
    Raised when an integration has to be aborted.

    Attributes:
        t: time reached before the abort
        state: last good FlowState
        partial: Trajectory of the samples produced so far (may be None)
    """

    def __init__(self, message: str, t: float, state: Any = None, partial: Any = None):
        super().__init__(message)
        self.t = t
        self.state = state
        self.partial = partial

class StepBudgetExceeded(IntegrationError):
    """Raised when the right-hand side evaluation budget runs out."""
    pass

class NonFiniteStateError(IntegrationError):
    """Raised when the state or the gradient stops being finite."""
    pass

class SolverError(FlowError):
    """Raised when a Newton solve fails to reach its tolerance."""

    def __init__(self, message: str, best_residual: Optional[float] = None):
        super().__init__(message)
        self.best_residual = best_residual

class AcceptanceError(FlowError):
    """Raised when a reproduced finding or a checked property does not hold."""
    pass

"""Exception types raised across igflow."""


class IGFlowError(Exception):
    """Base class for all igflow errors."""


class DomainError(IGFlowError, ValueError):
    """A point lies outside the model domain, or the metric is not positive definite there."""


class ConvergenceError(IGFlowError, RuntimeError):
    """An iterative solve (Legendre inversion) did not converge."""


class SingularFieldError(IGFlowError, ArithmeticError):
    """A scalar denominator (eta^2, xi*chi^2, ...) fell below the singularity threshold."""


class StepLimitExceeded(IGFlowError, RuntimeError):
    """An integration needed more steps than ``max_steps`` allows."""


class DomainBoundaryHit(IGFlowError):
    """An integration left the domain with the domain guard switched off.

    Attributes:
        param: Parameter value of the last valid state.
        state: Last valid state vector.
        trajectory: Partial trajectory up to and including the last valid state.
    """

    def __init__(self, message, param=None, state=None, trajectory=None):
        super().__init__(message)
        self.param = param
        self.state = state
        self.trajectory = trajectory


class InsufficientSamples(IGFlowError, ValueError):
    """A finite-difference diagnostic needs more samples than were supplied."""


class EvaluationError(IGFlowError):
    """A spacetime field could not be evaluated, or returned an invalid value."""


class SignatureError(IGFlowError, ValueError):
    """The shift outruns the lapse, so the Zermelo/Randers data are not valid."""


class ZeroVelocityError(IGFlowError, ValueError):
    """A Finsler function was evaluated at the zero vector."""


class ConfigError(IGFlowError, ValueError):
    """A run configuration is malformed or refers to something that does not exist."""

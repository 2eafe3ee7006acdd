"""Exception types shared across the package."""


class IntervalError(ValueError):
    """A step size or prox parameter lies outside the admissible interval."""


class ConstructionError(ValueError):
    """Constructor arguments violate a structural invariant."""


class PreconditionError(ValueError):
    """An operation's stated precondition does not hold for the inputs."""


class SolverDiagnosticError(RuntimeError):
    """An iterative solver gave up; carries the last iterate and residual."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""

"""Exception types shared by the solvers and the command line front end."""


class HeatCtlError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(HeatCtlError, ValueError):
    """Invalid geometry, grid or run configuration.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DomainError(HeatCtlError, ValueError):
    """An argument lies outside the domain of the operation (negative time, bad ordering)."""


class TargetError(DomainError):
    """The initial state already lies in the target ball."""


class PreconditionError(DomainError):
    """A horizon or sampling grid violates the well-posedness regime of the solver."""


class ZeroMinimizer(HeatCtlError):
    """The ball-regularized quadratic is minimized at the origin (``||q|| <= r``)."""


class NumericalError(HeatCtlError, ArithmeticError):
    """An iterative method failed to converge or a linear system was singular."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConstructionError(HeatCtlError):
    """A constructive witness (e.g. an orthogonal perturbation) could not be built."""

"""Exception hierarchy shared across the package."""


class StructVARError(Exception):
    """Base class for all package errors."""


class ParameterError(StructVARError, ValueError):
    """An argument is outside its admissible range."""


class StabilityError(StructVARError, ValueError):
    """A transition matrix is not stable (spectral radius >= 1)."""

    def __init__(self, message, spectral_radius=None):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class NumericalError(StructVARError, ArithmeticError):
    """Non-finite input or a numerically degenerate quantity."""


class DivergenceError(NumericalError):
    """The solver produced a non-finite objective.

    The partial :class:`~structvar.fnsl.SolveTrace` is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SingularDesignError(NumericalError):
    """The normal equations of a least-squares fit are singular."""

"""Exception hierarchy shared by all modules."""


class LargeSolError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LargeSolError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidFunctionError(LargeSolError, ValueError):
    """A user-supplied function returned non-positive or non-finite values."""


class InvalidWeightError(LargeSolError, ValueError):
    """A boundary weight is not in the Karamata class."""


class InvalidNonlinearityError(LargeSolError, ValueError):
    """A reaction term violates a structural hypothesis (e.g. F(u) = 0 for u > 0)."""


class KellerOssermanError(LargeSolError, ValueError):
    """The tail integral of 1/sqrt(F) does not converge."""


class ConfigurationError(LargeSolError, ValueError):
    """Declared and computed quantities disagree."""


class InvalidProfileError(LargeSolError, ValueError):
    """The blow-up profile is not convex at any tested scale."""


class NumericError(LargeSolError, RuntimeError):
    """Quadrature or root finding failed."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class NonConvergenceError(LargeSolError, RuntimeError):
    """An iteration failed to converge.

    ``report`` carries whatever diagnostic state was available when the
    iteration gave up (iterate dumps, Cauchy-gap traces, ...).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report if report is not None else {}


class PositivityError(NonConvergenceError):
    """Damping could not keep the Newton iterate positive."""


class BracketError(LargeSolError, RuntimeError):
    """Monotone iteration left the sub/super-solution bracket."""


class ResolutionError(LargeSolError, ValueError):
    """The grid cannot resolve the requested truncation offset."""


class WindowError(LargeSolError, ValueError):
    """A fit window contains too few admissible nodes."""

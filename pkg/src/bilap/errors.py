"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from :class:`BilapError`.
Numerical failures derive from :class:`NumericalError` so that the command
line front end can map them onto a single exit code.
"""


class BilapError(Exception):
    """Base class for all library errors."""


class ConfigError(BilapError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(BilapError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(BilapError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class NonFiniteSample(NumericalError):
    """An integrand returned a non-finite value at a grid node.

    Parameters
    ----------
    index : int
        Flat index of the first offending node.
    """

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"non-finite integrand value at node {self.index}")


class NotConverged(NumericalError):
    """Refinement stopped before reaching the requested tolerance.

    The best available estimate is attached as ``estimate`` so callers can
    decide whether it is good enough.
    """

    def __init__(self, estimate, message=None):
        self.estimate = estimate
        super().__init__(message or f"quadrature did not converge: {estimate}")


class NoConvergence(NumericalError):
    """Richardson extrapolation did not settle."""


class OrderDetectionAmbiguous(NumericalError):
    """A log-log slope was not close to an even integer."""


class DivergenceMismatch(NumericalError):
    """Numerical convergence verdict disagrees with the exponent criterion."""


class BracketFailure(NumericalError):
    """No sign change of the secular function could be bracketed."""


class NoDiscreteSpectrum(BilapError):
    """The coupling lies in the closed interval without discrete spectrum."""

    def __init__(self, mu, lower, upper):
        self.mu = mu
        self.interval = (-upper, lower)
        super().__init__(f"mu={mu!r} lies in [{-upper!r}, {lower!r}]: no eigenvalue outside the band")


class NoRoot(NumericalError):
    """The finite-grid secular function has no root on the searched side."""


class SizeExceeded(BilapError):
    """A grid or dense matrix would exceed the configured size cap."""


class MissingIngredient(BilapError):
    """A constant needed by an asymptotic formula is infinite or undefined."""


class InsufficientData(BilapError):
    """Too few usable points for a fit."""


class IllConditioned(NumericalError):
    """The normal equations of a fit are numerically singular."""

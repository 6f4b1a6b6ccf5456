"""Exception types shared across the package."""


class QecHeatError(Exception):
    """Base class for all package errors."""


class ValidationError(QecHeatError, ValueError):
    """A parameter or state failed validation."""


class ConfigError(QecHeatError, ValueError):
    """Configuration file or override could not be parsed or validated.

    Carries the dotted path to the offending field and, when the source
    format provides one, the line number.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path:
            loc += f" (at {path}"
            if line is not None:
                loc += f", line {line}"
            loc += ")"
        elif line is not None:
            loc += f" (line {line})"
        super().__init__(message + loc)


class NumericalInstabilityError(QecHeatError, ArithmeticError):
    """The lattice field went non-finite or non-positive during stepping."""

    def __init__(self, site, step, value=None):
        self.site = int(site)
        self.step = int(step)
        self.value = value
        detail = f" (value {value!r})" if value is not None else ""
        super().__init__(
            f"numerical instability at site {self.site}, step {self.step}{detail}"
        )


class BracketError(QecHeatError, ValueError):
    """A bisection bracket does not straddle the phase transition."""

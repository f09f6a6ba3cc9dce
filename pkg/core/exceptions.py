"""
Exception hierarchy shared by every app.

Domain errors subclass ``ValueError`` so callers that only expect bad-input
errors keep working. Management commands map them to exit codes:
- ConfigurationError       -> 2
- InsufficientBudgetError  -> 3
"""


class CvmdlError(Exception):
    """Base class for all project errors."""


class ConfigurationError(CvmdlError, ValueError):
    """Malformed ensemble or experiment configuration."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}

    def __str__(self):
        if not self.errors:
            return super().__str__()
        details = "; ".join(f"{field}: {', '.join(map(str, msgs))}" for field, msgs in self.errors.items())
        return f"{super().__str__()} ({details})"


class InsufficientBudgetError(CvmdlError, ValueError):
    """The budget cannot cover the requested sampling."""


class PoolExhaustedError(CvmdlError, ValueError):
    """A sample pool drawn without replacement ran out of rows."""


class DimensionMismatchError(CvmdlError, ValueError):
    """Array shapes disagree with the declared model dimensions."""


class SampleSizeError(CvmdlError, ValueError):
    """Too few (or non-finite) samples for the requested statistic."""


class DegenerateSubsetError(CvmdlError, ValueError):
    """Both loss coefficients vanished; the subset carries no information."""


class ImproperCdfError(CvmdlError, ValueError):
    """A CDF is not monotone, not normalized, or a level is out of range."""

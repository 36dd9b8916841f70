"""Exception types raised across the package."""


class TomographyError(Exception):
    """Base class for all package errors."""


class DomainError(TomographyError, ValueError):
    """A parameter lies outside its admissible range."""


class UnsupportedOrderError(DomainError):
    """Requested Fock order exceeds the supported recursion cap."""


class GridError(TomographyError, ValueError):
    """Degenerate or inconsistent grid definition."""


class TruncationError(TomographyError, ValueError):
    """Fock truncation discards more population than allowed."""


class SingularDataError(TomographyError):
    """A data point has vanishing probability under the current state."""


class IllConditionedError(TomographyError):
    """The completeness operator cannot be inverted reliably."""


class ClippingError(TomographyError):
    """A spatial field leaves the sampling window."""


class InputFormatError(TomographyError, ValueError):
    """A data or configuration file cannot be parsed."""

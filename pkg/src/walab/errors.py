"""Exception hierarchy shared by all walab modules."""


class WalabError(Exception):
    """Base class for all errors raised by this package."""


class LayoutError(WalabError):
    """Two weight vectors (or a vector and a model) disagree on parameter layout."""


class NumericError(WalabError):
    """A non-finite value (NaN/Inf) appeared where finite numbers are required."""


class SpecError(WalabError):
    """A model, schedule, or simulation description is internally inconsistent."""


class FormatError(WalabError):
    """A data file does not match its documented binary format.

    ``offset`` holds the byte offset of the first inconsistency when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class RangeError(WalabError):
    """An index (batch step, epoch) is outside its valid range."""


class UsageError(WalabError):
    """Bad command-line arguments or an unknown preset name."""

class SprintzError(Exception):
    """Base class for codec errors."""


class CorruptStreamError(SprintzError, ValueError):
    """Raised when compressed input cannot be decoded.

    ``offset`` is the byte position (within the buffer being parsed) where
    the problem was detected, or ``None`` when no position applies.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class DataFormatError(SprintzError, ValueError):
    """Raised when an input data file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

"""
Exception classes raised by sktune.

Every class derives from `SktuneError`, and also from the builtin exception that a caller would
expect for the same condition (e.g. `ValueError` for an invalid shape or value), so that code
catching builtins keeps working.
"""

# Standard library
from typing import Optional


__all__ = [
    "SktuneError",
    "ShapeMismatchError",
    "LabelOutOfRangeError",
    "NoTapeError",
    "TokenOutOfRangeError",
    "SequenceTooLongError",
    "SequenceEmptyError",
    "PrefixLayerMismatchError",
    "IllegalPrefixLengthError",
    "BadRankError",
    "MissingGradError",
    "NonFiniteError",
    "MalformedLineError",
    "LengthMismatchError",
    "UnknownLabelError",
    "BadFractionsError",
    "EmptyInputError",
    "NonBinaryError",
    "IndexOutOfRangeError",
    "CheckpointFormatError",
]


class SktuneError(Exception):
    """
    Superclass for all sktune exceptions.
    """
    pass


class ShapeMismatchError(SktuneError, ValueError):
    pass


class LabelOutOfRangeError(SktuneError, ValueError):
    pass


class NoTapeError(SktuneError, RuntimeError):
    pass


class TokenOutOfRangeError(SktuneError, ValueError):
    pass


class SequenceTooLongError(SktuneError, ValueError):
    pass


class SequenceEmptyError(SktuneError, ValueError):
    pass


class PrefixLayerMismatchError(SktuneError, ValueError):
    pass


class IllegalPrefixLengthError(SktuneError, ValueError):
    pass


class BadRankError(SktuneError, ValueError):
    pass


class MissingGradError(SktuneError, ValueError):
    pass


class NonFiniteError(SktuneError, RuntimeError):
    """
    Raised when a loss (or a value about to be serialized) is NaN or infinite.

    Parameters
    ----------
    message : str
        Description of the offending value.
    step : int, optional
        Index of the training step at which the value was produced.
    """
    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class MalformedLineError(SktuneError, ValueError):
    """
    Raised when a line of a JSONL file cannot be parsed into an example.
    """
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LengthMismatchError(SktuneError, ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        super().__init__(message if lineno is None else f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownLabelError(SktuneError, ValueError):
    pass


class BadFractionsError(SktuneError, ValueError):
    pass


class EmptyInputError(SktuneError, ValueError):
    pass


class NonBinaryError(SktuneError, ValueError):
    pass


class IndexOutOfRangeError(SktuneError, IndexError):
    pass


class CheckpointFormatError(SktuneError, ValueError):
    pass

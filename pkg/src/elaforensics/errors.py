"""Exception hierarchy shared by every module in the package."""

from __future__ import annotations


class ForensicsError(Exception):
    """Base class for all errors raised by elaforensics."""


class InvalidParameter(ForensicsError, ValueError):
    """A parameter is outside its documented domain."""


class ImageNotFound(ForensicsError, FileNotFoundError):
    pass


class UnsupportedFormat(ForensicsError):
    pass


class CorruptImage(ForensicsError):
    pass


class EncodeFailure(ForensicsError):
    pass


class LengthMismatch(InvalidParameter):
    pass


class ShapeMismatch(InvalidParameter):
    pass


class NegativeComponent(InvalidParameter):
    pass


class OutOfBounds(ForensicsError, ValueError):
    pass


class EmptyCorpus(ForensicsError):
    pass


class NoAdmissiblePlacement(ForensicsError):
    def __init__(self, sample_index: int, retries: int):
        super().__init__(
            f"no admissible placement for sample {sample_index} after {retries} retries"
        )
        self.sample_index = sample_index
        self.retries = retries


class NoGroundTruth(ForensicsError, ValueError):
    pass


class ParseError(ForensicsError, ValueError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class UnknownImage(ForensicsError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""

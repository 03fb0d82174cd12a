"""Exception hierarchy shared by every apex module."""

from __future__ import annotations


class ApexError(Exception):
    """Base class for all apex errors."""


class ParseError(ApexError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class IntegrityError(ApexError):
    """A log, path or graph disagrees with another artifact it must match."""


class EventNotEnabled(ApexError):
    def __init__(self, message: str = "event not enabled", index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} (sequence index {index})"
        super().__init__(message)


class RuntimeTrap(ApexError):
    """Raised inside the interpreter; caught at the event boundary."""


class Unsupported(ApexError):
    """Symbolic execution met something it refuses to model."""


class NoModelPath(ApexError):
    """The GUI model has no transition sequence reaching a state."""

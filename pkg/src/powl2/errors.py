"""Exception hierarchy shared by all powl2 modules."""


class Powl2Error(Exception):
    """Base class for every error raised by this package."""


class LogParseError(Powl2Error):
    """Input bytes could not be parsed (malformed XML, bad timestamps, ...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(Powl2Error):
    """Input parsed fine but does not follow the expected layout."""


class ContractError(Powl2Error, ValueError):
    """A caller violated a documented precondition."""


class InvariantError(Powl2Error, RuntimeError):
    """An internal invariant broke. Always a bug, never a user error."""


class UndefinedPrecisionError(Powl2Error, ArithmeticError):
    """No prefix enables any activity, so escaping-edge precision is 0/0."""

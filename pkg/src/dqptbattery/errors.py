"""Exception types raised across the package."""

from __future__ import annotations


class BatteryError(Exception):
    """Base class for all package errors."""


class GapClosing(BatteryError, ArithmeticError):
    """Band energy below the gap-closing threshold; the unit Bloch vector is undefined."""

    def __init__(self, k, eps):
        self.k = k
        self.eps = eps
        super().__init__(f"gap closes at k={k!r} (eps={eps!r})")


class InvalidCount(BatteryError, ValueError):
    pass


class ParseError(BatteryError, ValueError):
    """Expression or model-file syntax error.

    ``offset`` is the byte offset into the expression text. ``line`` and
    ``column`` (1-based) are filled in when the expression came from a file.
    """

    def __init__(self, message, offset=None, line=None, column=None):
        self.message = message
        self.offset = offset
        self.line = line
        self.column = column
        super().__init__(self._render())

    def _render(self):
        if self.line is not None:
            return f"line {self.line}, column {self.column}: {self.message}"
        if self.offset is not None:
            return f"offset {self.offset}: {self.message}"
        return self.message

    def located(self, line, column):
        """Return a copy positioned at ``line``/``column`` of a file."""
        return ParseError(self.message, self.offset, line, column)


class UnboundSymbol(BatteryError, LookupError):
    def __init__(self, names):
        self.names = tuple(sorted(set(names)))
        super().__init__("unbound symbol(s): " + ", ".join(self.names))


class EvalError(BatteryError, ArithmeticError):
    pass


class StepTooLarge(BatteryError, ValueError):
    pass


class NonFinite(BatteryError, ArithmeticError):
    """A NaN or Inf appeared during integration or a sweep.

    ``coords`` carries whatever location is known, e.g. ``{"t": 1.0, "gf": 1.3}``.
    """

    def __init__(self, message, coords=None):
        self.coords = dict(coords or {})
        if self.coords:
            where = ", ".join(f"{key}={value!r}" for key, value in self.coords.items())
            message = f"{message} at {where}"
        super().__init__(message)


class NoDQPT(BatteryError, ValueError):
    pass


class TooFewSamples(BatteryError, ValueError):
    pass


class ConfigError(BatteryError, ValueError):
    """Invalid configuration; ``problems`` lists every offending field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class MissingColumn(BatteryError, LookupError):
    pass


class TooFewRows(BatteryError, ValueError):
    pass

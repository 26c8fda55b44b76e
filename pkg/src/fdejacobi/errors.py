"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericalFailure(ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class PreconditionError(ValueError):
    """Required data is missing for the requested computation."""


class ConfigError(ValueError):
    """An experiment configuration or problem file is invalid."""


class ParseError(ConfigError):
    """A problem-file expression could not be parsed."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column

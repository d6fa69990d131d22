"""Exception types shared across the package.

Every error raised on a user-facing path derives from GapsubError so CLI
code can map failures to exit codes in one place.
"""
from __future__ import annotations


class GapsubError(Exception):
    """Base class for all package errors."""


class ConfigError(GapsubError):
    """Malformed run configuration or command-line input."""


class SchemaError(ConfigError):
    """A JSON document failed structural validation.

    Carries (pointer, message) pairs so callers can point at the exact
    offending field.
    """

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = ", ".join(f"{ptr}: {msg}" for ptr, msg in self.problems)
        super().__init__(f"schema validation failed: {lines}")


class ValidationError(GapsubError):
    """A numeric object violates its contract (normalization, consistency)."""


class ScheduleRangeError(GapsubError):
    """A schedule was queried outside its defined range."""


class CapExceededError(GapsubError):
    """An exact enumeration would exceed the configured work cap."""


class DecouplingFailure(GapsubError):
    """Upper decoupling does not hold for the measure at the audited sizes."""

    def __init__(self, message: str, witnesses: list[tuple] | None = None):
        self.witnesses = witnesses or []
        super().__init__(message)


class GapLiftError(GapsubError):
    """The base sequence is not plainly subadditive, so no lift is defined."""

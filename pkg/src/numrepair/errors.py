"""Exception hierarchy shared by every module."""

from __future__ import annotations


class NumRepairError(Exception):
    """Base class for all errors raised by numrepair."""


class LoadError(NumRepairError):
    """A schema, table file or project could not be loaded."""


class SchemaError(NumRepairError):
    """A schema declaration is malformed or violates an invariant."""


class ConstraintSyntaxError(NumRepairError):
    """The constraint DSL text does not parse."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ConstraintError(NumRepairError):
    """A parsed constraint refers to unknown names or breaks a rule of the fragment."""


class InvalidUpdateError(NumRepairError):
    """An update set is not a consistent database update for an instance."""


class EvaluationError(NumRepairError):
    """A condition or expression cannot be evaluated on the given values."""


class BranchLimitError(NumRepairError):
    """The case split of a support encoding exceeded the configured cap."""

    def __init__(self, count: int, cap: int) -> None:
        super().__init__(f"branch explosion: {count} branches exceed the cap of {cap}")
        self.count = count
        self.cap = cap


class ResourceError(NumRepairError):
    """An oracle was asked for an enumeration larger than it accepts."""

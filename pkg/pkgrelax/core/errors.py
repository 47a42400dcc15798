"""Exception hierarchy. Every error carries the exit code the CLI reports for it."""

from typing import Optional


class PackageRelaxError(Exception):
    """Base class for all pkgrelax errors"""

    exit_code = 1


class ContractError(PackageRelaxError):
    """A caller broke an operation's precondition"""


class DataValidationError(PackageRelaxError):
    """Item or package data violates an invariant (duplicate ids, bad values)"""

    exit_code = 2


class ParseError(DataValidationError):
    """A dataset cell could not be read as a number"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class SchemaError(PackageRelaxError):
    """A query references an attribute the item table does not have"""

    exit_code = 2


class QueryError(PackageRelaxError):
    """A query document is malformed"""

    exit_code = 2


class CapacityError(PackageRelaxError):
    """Instance too large for an enumerating method"""

    exit_code = 4


class ResourceError(PackageRelaxError):
    """Solver exhausted its node budget"""

    exit_code = 4


class GenerationError(PackageRelaxError):
    """Benchmark workload generation failed"""

    exit_code = 5

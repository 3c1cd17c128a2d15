"""Exception hierarchy for uqrank.

Every failure the library raises on purpose derives from :class:`UqrankError`, so the CLI
can turn it into a single error problem and a non-zero exit code.
"""


class UqrankError(Exception):
    """Base class of all uqrank errors."""


class ShapeError(UqrankError):
    """Tensor shapes are incompatible for the requested operation."""


class DomainError(UqrankError):
    """A value lies outside the mathematical domain of an operation (log of 0, div by 0)."""


class UsageError(UqrankError):
    """An API was called with an invalid mode or argument."""


class ConfigError(UqrankError):
    """A configuration file or generation spec is inconsistent or malformed."""


class SchemaError(UqrankError):
    """A dialog JSON file lacks a required field.

    Attributes:
        field: Name of the missing field
    """

    def __init__(self, field: str, where: str = "") -> None:
        self.field = field
        self.where = where
        location = f" in {where}" if where else ""
        super().__init__(f'missing required field "{field}"{location}')


class ParseError(UqrankError):
    """A file could not be parsed.

    Attributes:
        path: File that failed to parse
        line: 1-based line of the failure
        col: 1-based column of the failure
    """

    def __init__(self, path: str, line: int, col: int, msg: str) -> None:
        self.path = path
        self.line = line
        self.col = col
        super().__init__(f"{path}:{line}:{col}: {msg}")


class NonFiniteLossError(UqrankError):
    """A loss component became NaN or infinite during training.

    Attributes:
        component: Name of the offending loss component (e.g. "GCE")
    """

    def __init__(self, component: str, epoch: int) -> None:
        self.component = component
        self.epoch = epoch
        super().__init__(f"loss component {component} is not finite at epoch {epoch}")


class UndefinedMetricError(UqrankError):
    """A metric is undefined for its input (NDCG without any relevant candidate)."""


class ReportIOError(UqrankError):
    """A report file or directory could not be written."""

"""Exception types raised across the package."""


class MugError(Exception):
    """Base class for all package errors."""


class ZeroColumnError(MugError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column + 1} has zero norm and cannot be normalized")


class EmptyListError(MugError, ValueError):
    pass


class BadGroupIndexError(MugError, IndexError):
    pass


class DimensionMismatchError(MugError, ValueError):
    pass


class SolverFailure(MugError, RuntimeError):
    """Every point of a regularization path failed to converge."""


class DegenerateSplitError(MugError, ValueError):
    pass


class EmptyInputError(MugError, ValueError):
    pass


class ConfigError(MugError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(MugError, ValueError):
    pass


class RaggedRowsError(DataError):
    def __init__(self, path, line, expected, found):
        self.path, self.line = path, line
        super().__init__(
            f"{path}: line {line} has {found} fields, expected {expected}"
        )


class NonNumericCellError(DataError):
    def __init__(self, path, line, column, value):
        self.path, self.line, self.column = path, line, column
        super().__init__(
            f"{path}: line {line}, column {column}: non-numeric value {value!r}"
        )

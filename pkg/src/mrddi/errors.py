"""Exception types raised across the package."""


class MrddiError(Exception):
    """Base class; ``module`` names where the failure originated."""

    module = "mrddi"


class ValidationError(MrddiError):
    module = "core-data"

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class EmptyArm(MrddiError):
    module = "core-data"

    def __init__(self, arms):
        self.arms = tuple(arms)
        super().__init__(f"empty treatment arm(s): {', '.join(map(str, self.arms))}")


class ParseError(MrddiError):
    module = "propensity"

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnknownVariable(MrddiError):
    module = "propensity"


class DomainError(MrddiError):
    """Log of a non-positive value, in a formula term or under the log link."""

    module = "propensity/estimator"


class SeparationError(MrddiError):
    module = "propensity"


class NonConvergence(MrddiError):
    module = "propensity"


class AllColumnsDropped(MrddiError):
    module = "weights"


class DualNonConvergence(MrddiError):
    module = "weights"


class TooManyFailures(MrddiError):
    module = "estimator"


class ConstantCovariate(MrddiError):
    module = "diagnostics"


class BracketError(MrddiError):
    module = "simulation"


class SchemaError(MrddiError):
    module = "cli-io"


class CsvParseError(ParseError):
    """A non-numeric cell in an input CSV (rows numbered from 1, header excluded)."""

    module = "cli-io"

    def __init__(self, row, column, cell):
        self.row = row
        self.column = column
        self.cell = cell
        MrddiError.__init__(self, f"cannot parse {cell!r} as a number at row {row}, column {column!r}")
        self.position = None


class ConfigError(MrddiError):
    module = "cli-io"

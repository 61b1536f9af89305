"""Exception hierarchy.

Each error class carries the CLI exit code it maps to.
"""


class ExposureEvalError(Exception):
    exit_code = 1


class ConfigError(ExposureEvalError):
    """Bad arguments or missing input files."""

    exit_code = 2


class DomainError(ConfigError, ValueError):
    """A numeric argument outside its valid domain."""


class ShapeError(ExposureEvalError, ValueError):
    """Inputs whose dimensions do not line up."""

    exit_code = 3


class LabelFormatError(ExposureEvalError, ValueError):
    """Undecodable label file, wrong PNG layout, or out-of-range class id."""

    exit_code = 3


class CacheMismatchError(ExposureEvalError, ValueError):
    exit_code = 3


class MetricUndefinedError(ExposureEvalError, ArithmeticError):
    exit_code = 4


class GradientCheckError(ExposureEvalError):
    exit_code = 5

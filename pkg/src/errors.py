"""Exception hierarchy for the SOMF engine."""


class SomfError(Exception):
    """Base class for all errors raised by the SOMF engine."""


class DomainError(SomfError, ValueError):
    """Argument outside its mathematical domain (negative radius, r < 1, ...)."""


class DimensionMismatchError(SomfError, ValueError):
    """Arrays with incompatible shapes were combined."""


class SingularityError(SomfError, ArithmeticError):
    """A code coordinate has zero curvature but a nonzero linear term."""


class MissingGramError(SomfError, ValueError):
    """The exact-Gram estimator was used without a maintained Gram matrix."""


class DatasetFormatError(SomfError, ValueError):
    """A dataset file is malformed or truncated."""


class NonFiniteValueError(SomfError, ValueError):
    """A dataset or input matrix contains NaN or infinite entries."""


class DimensionOverflowError(SomfError, ValueError):
    """A file header declares dimensions too large to be addressed."""


class ConfigError(SomfError, ValueError):
    """A run configuration file is invalid."""

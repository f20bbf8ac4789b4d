"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`HeigError` so that
the CLI can catch one base class and report a typed message.
"""


class HeigError(Exception):
    """Base class for all package errors."""


class InvalidCallTarget(HeigError):
    """A call interaction targets an EOA; call targets must be contracts."""


class DanglingEndpoint(HeigError):
    """An edge references an account id that is not part of the graph."""


class DuplicateAccount(HeigError):
    """Two accounts with the same id were supplied to graph construction."""


class ParseError(HeigError):
    """A CSV row violates the expected schema.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvalidK(HeigError):
    """Filter fraction k outside (0, 1]."""


class InsufficientNegatives(HeigError):
    """Fewer labeled negatives available than the requested sample size."""


class UnknownAccount(HeigError):
    """Account id not present in the graph."""


class DimensionMismatch(HeigError):
    """Vector or matrix dimensions do not match the configured sizes."""


class ShapeMismatch(DimensionMismatch):
    """Tensor shapes inconsistent with the model configuration."""


class NonFinite(HeigError):
    """A computation produced NaN or infinity."""


class EmptyTrainingSet(HeigError):
    """No training pairs available for a generator."""


class MissingModel(HeigError):
    """No trained generator available for a required triplet relation."""


class EmptyViewList(HeigError):
    """View pooling invoked with zero views."""


class EmptyMask(HeigError):
    """Loss or metric requested over an empty node mask."""


class TooFewLabels(HeigError):
    """Not enough labeled nodes per class to produce stratified splits."""


class EmptyInput(HeigError):
    """Metric invoked on empty prediction/label sequences."""


class InvalidSpec(HeigError):
    """Synthetic generator specification violates its invariants."""


class MissingUpstream(HeigError):
    """A pipeline stage was invoked before its upstream artifacts exist."""


class ConfigError(HeigError):
    """Invalid or inconsistent pipeline configuration."""

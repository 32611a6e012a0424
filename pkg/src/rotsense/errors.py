"""Exception hierarchy shared across the package.

Every class carries a distinct ``exit_code`` so the CLI can map error
classes to distinct nonzero process exit codes.
"""


class RotsenseError(Exception):
    """Base class for all rotsense errors."""

    exit_code = 1


class InvalidArgumentError(RotsenseError, ValueError):
    """An argument violates a documented precondition."""

    exit_code = 3


class DegeneratePairError(InvalidArgumentError):
    """Parameter pair too close in Euclidean distance for a ratio."""

    exit_code = 4


class UnboundedConstantError(RotsenseError):
    """Operation requires a finite distance ratio constant but got infinity."""

    exit_code = 5


class ConvergenceFailureError(RotsenseError):
    """Power iteration hit its iteration cap; carries the best estimate."""

    exit_code = 6

    def __init__(self, message, best_estimate=None, witness=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.witness = witness


class ModelFormatError(RotsenseError):
    """Base class for model manifest / tensor file problems."""

    exit_code = 7


class UnsupportedVersionError(ModelFormatError):
    exit_code = 8


class UnknownLayerKindError(ModelFormatError):
    exit_code = 9


class MissingTensorError(ModelFormatError):
    exit_code = 10


class ShapeMismatchError(ModelFormatError):
    exit_code = 11


class NonFiniteWeightError(ModelFormatError):
    exit_code = 12

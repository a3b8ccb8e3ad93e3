"""Exception hierarchy shared by every module.

The CLI maps each class onto a stable exit code.
"""


class RevGNNError(Exception):
    exit_code = 1


class InputError(RevGNNError, ValueError):
    """Missing, malformed or inconsistent input data or configuration."""

    exit_code = 2


class ShapeError(RevGNNError, ValueError):
    exit_code = 2


class NumericalError(RevGNNError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""

    exit_code = 3


class ArtifactMismatch(RevGNNError):
    """A checkpoint does not belong to the prepared data it is used with."""

    exit_code = 4

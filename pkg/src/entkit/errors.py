"""Exception hierarchy shared across the package.

Validation-type errors (bad inputs, malformed files, out-of-range
parameters) are distinguished from numerical failures so the CLI can map
them to different exit codes.
"""


class EntkitError(Exception):
    """Base class for all package errors."""


class ValidationError(EntkitError):
    """Base class for input/validation problems (CLI exit code 2)."""


class ShapeError(ValidationError):
    """Dimension metadata does not match the operator it describes."""


class DomainError(ValidationError):
    """A numeric parameter is outside its admissible range."""


class HermiticityError(ValidationError):
    """Matrix is not Hermitian within tolerance."""


class PositivityError(ValidationError):
    """Operator has an eigenvalue below the admissible floor."""


class TraceError(ValidationError):
    """Operator trace differs from one beyond tolerance."""


class PurityError(ValidationError):
    """A pure state was required but a mixed one was supplied."""


class SizeCapError(ValidationError):
    """Requested object exceeds the configured dimension cap."""


class FormatError(ValidationError):
    """A state or channel file failed to parse."""


class ModeError(ValidationError):
    """Requested analysis mode is not applicable to the given object."""


class NumericalFailure(EntkitError):
    """An iterative routine failed to converge (CLI exit code 3).

    Carries whatever partial result was available so callers can inspect
    residuals.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SingularityWarning(UserWarning):
    """A matrix-logarithm input needed eigenvalue flooring."""

"""Exception hierarchy.

Everything raised deliberately by the package derives from ``AvsumError``.
Input problems (bad files, bad parameters, shape mismatches) are
``ValidationError``; the CLI maps those to exit code 2 and anything else
to exit code 3.
"""


class AvsumError(Exception):
    pass


class ValidationError(AvsumError, ValueError):
    pass


class FormatError(ValidationError):
    """A file on disk does not follow its container format."""


class BadMagicError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class NonFiniteError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class GradientError(AvsumError):
    """Analytic gradient is missing or non-finite."""

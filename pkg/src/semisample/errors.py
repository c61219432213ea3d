"""Exception types shared across the package."""


class SemisampleError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SemisampleError):
    """On-disk data does not match its declared format."""


class InputError(SemisampleError):
    """An operation received arguments that violate its contract."""


class NotFoundError(SemisampleError):
    """A required file or directory is missing."""

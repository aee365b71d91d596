"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data errors -> 2,
numeric failures -> 3.
"""


class AquaganError(Exception):
    """Base class for all package errors."""


class DecodeError(AquaganError):
    """An image file could not be read or has an unusable pixel layout."""


class ShapeError(AquaganError):
    """Array arguments have incompatible or unsupported shapes."""


class DataError(AquaganError):
    """A dataset directory does not satisfy the expected layout."""


class CheckpointError(AquaganError):
    """A checkpoint file is corrupted, truncated, or of an unknown version."""


class SpecMismatchError(CheckpointError):
    """Checkpoint contents do not match the requested network specification."""


class NumericError(AquaganError):
    """Training produced a non-finite loss value."""

"""Exception hierarchy shared by every sdec module.

The CLI maps these onto exit codes: ConfigError -> 2, data errors
(FormatError / ValidationError and subclasses) -> 3, DivergenceError -> 4.
"""


class SdecError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SdecError):
    """A file does not conform to its on-disk format."""


class UnsupportedVersionError(FormatError):
    """File format version is not supported by this release."""


class CorruptionError(FormatError):
    """File header and payload disagree (truncation, trailing bytes)."""


class ValidationError(SdecError):
    """Well-formed input violates a semantic invariant (NaN, bad label)."""


class AlignmentError(ValidationError):
    """Paired files disagree on item counts."""


class ShapeError(SdecError):
    """Array dimensions do not match what an operation requires."""


class TransferError(ShapeError):
    """A foreign dataset cannot be fed to a trained model."""


class ArgumentError(SdecError):
    """An operation was called with out-of-contract arguments."""


class UnsupportedTaskError(ArgumentError):
    """Operation applied to a dataset of the wrong task type."""


class StateError(SdecError):
    """Stale or mismatched internal state (e.g. a foreign backward cache)."""


class DivergenceError(SdecError):
    """Training produced a non-finite loss or gradient."""


class DegenerateClusterError(SdecError):
    """A cluster lost all soft mass and cannot be renormalized."""


class ConfigError(SdecError):
    """Run configuration is missing, malformed, or contains unknown keys."""

"""Exception types raised on malformed data or degenerate inputs.

Everything here derives from PtqError so callers (notably the CLI) can
distinguish data problems from programming errors: PtqError and OSError
map to exit code 1, argparse handles usage errors with exit code 2.
"""


class PtqError(Exception):
    """Base class for data and format errors."""


class BadMagicError(PtqError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(PtqError):
    """Container version is not one this reader understands."""


class InvalidHeaderError(PtqError):
    """Header is not valid JSON or is missing required fields."""


class TruncatedPayloadError(PtqError):
    """Declared lengths point past the end of the file."""


class ShapeMismatchError(PtqError):
    """Tensor shape disagrees with the stored byte count or layer dims."""


class NonFiniteValueError(PtqError):
    """A weight tensor contains NaN or infinity."""


class BitstreamLengthError(PtqError):
    """Packed stream bit-length disagrees with the per-channel widths."""


class EmptyBundleError(PtqError):
    """Operation needs at least one layer but the model has none."""


class EmptyCdfError(PtqError):
    """Empirical distribution built from zero samples."""


class DegenerateRangeError(PtqError):
    """All weights are zero, so no split point exists."""


class ZeroRangeError(PtqError):
    """Uniform quantizer range has zero width."""

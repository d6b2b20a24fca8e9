"""Exception types shared across the package.

Validation problems derive from ValueError so callers can catch either the
specific class or the builtin. I/O problems are left as OSError subclasses
raised by the standard library.
"""


class FisherlensError(ValueError):
    """Base class for validation and format errors raised by this package."""


class CascadeFormatError(FisherlensError):
    """Cascade XML is malformed or violates the expected schema."""


class UnsupportedCascadeError(CascadeFormatError):
    """Cascade uses a construct we deliberately do not support (trees, tilted)."""


class NetpbmError(FisherlensError):
    """PGM/PPM document cannot be parsed or uses an unsupported variant."""


class ModelFormatError(FisherlensError):
    """Persisted Fisherface model is malformed, inconsistent or wrong version."""


class NumericalError(FisherlensError):
    """A numerical routine failed to converge or hit a singular matrix."""


class RankError(NumericalError):
    """Requested subspace dimension exceeds the numerical rank of the data."""


class IngestError(FisherlensError):
    """Dataset tree exists but one of its label files cannot be interpreted."""


class SplitError(FisherlensError):
    """Train/test split preconditions violated (class too small, bad fraction)."""


class EmptyResultError(FisherlensError):
    """A pipeline stage produced nothing to continue with."""

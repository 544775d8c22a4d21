"""Exception hierarchy shared by all pipeline stages.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and
subclasses) -> 2, InternalError -> 3.
"""


class PipelineError(Exception):
    """Base class for all structured pipeline errors."""


class ConfigError(PipelineError):
    """Invalid configuration, mismatched argument lists, bad parameters."""


class DataError(PipelineError):
    """Problems with input data (files, label contents, geometry)."""


class IoError(DataError):
    """Missing or unreadable file."""


class FormatError(DataError):
    """File content violates the documented on-disk format."""


class SerializationError(DataError):
    """Attempt to serialize an object that is not in a writable state."""


class DegenerateGeometry(DataError):
    """Geometric solve is rank-deficient (coplanar/collinear data)."""


class NoClusters(DataError):
    """Clustering produced only noise; caller decides the fallback."""


class InstanceOverflow(DataError):
    """More instance ids than the packed label encoding can hold."""


class LengthMismatch(DataError):
    """Parallel arrays disagree in length."""


class ClassTableMismatch(DataError):
    """Two reports/label sets were built against different class tables."""


class InternalError(PipelineError):
    """An internal invariant was violated; indicates a bug."""


class CoverageError(InternalError):
    """A point reached a stage without the required cluster assignment."""

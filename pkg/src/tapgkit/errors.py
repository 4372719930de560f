"""Exception types shared across the toolkit."""


class TapgkitError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(TapgkitError, ValueError):
    """Tensor extents are inconsistent with the requested operation."""


class EmptyInputError(TapgkitError, ValueError):
    """An operation that needs at least one element received none."""


class DegenerateInputError(TapgkitError, ValueError):
    """Numerically degenerate input (zero norm, invalid interval, ...)."""


class GraphError(TapgkitError, RuntimeError):
    """Misuse of the autodiff tape (non-scalar loss, replayed tape, ...)."""


class FileFormatError(TapgkitError, ValueError):
    """A binary or JSON artifact does not match its declared format."""


class AnnotationError(TapgkitError, ValueError):
    """A ground-truth annotation record violates its invariants."""


class ConfigError(TapgkitError, ValueError):
    """A run configuration is missing keys or holds invalid values."""

"""Temporal action proposal toolkit.

End-to-end pipeline for finding candidate action intervals in untrimmed
videos: multi-stream snippet fusion with context-adaptive attention, a
boundary-matching proposal network, count-balanced training losses,
score-decay suppression, and recall/precision evaluation. Built on an
in-package reverse-mode autodiff tensor library.
"""

__version__ = "0.1.0"

from tapgkit.errors import (
    AnnotationError,
    ConfigError,
    DegenerateInputError,
    EmptyInputError,
    FileFormatError,
    GraphError,
    ShapeError,
    TapgkitError,
)

__all__ = [
    "AnnotationError", "ConfigError", "DegenerateInputError",
    "EmptyInputError", "FileFormatError", "GraphError", "ShapeError",
    "TapgkitError", "__version__",
]

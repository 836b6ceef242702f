"""
Utility modules shared across the package.
"""

from .types import (
    RGB,
    BackgroundKind,
    ClassID,
    DomainID,
    ImageShape,
    Mechanism,
    Method,
    ProviderPolicy,
    SampleID,
    Split,
)
from .errors import (
    AmplitudeError,
    ConfigurationError,
    DatasetFormatError,
    DivergenceError,
    GraphError,
    ModeError,
    ShapeError,
    SimplexError,
    SizeError,
)
from .rng import derive_rng

__all__ = [
    # Type aliases
    "DomainID",
    "ClassID",
    "SampleID",
    "ImageShape",
    "RGB",

    # Enums
    "Method",
    "Mechanism",
    "ProviderPolicy",
    "BackgroundKind",
    "Split",

    # Errors
    "ModeError",
    "ShapeError",
    "SizeError",
    "SimplexError",
    "AmplitudeError",
    "GraphError",
    "ConfigurationError",
    "DatasetFormatError",
    "DivergenceError",

    # Randomness
    "derive_rng",
]

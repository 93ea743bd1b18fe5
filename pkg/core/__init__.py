"""Core module containing shared exceptions, error handling and logging setup."""

from core.exceptions import (
    EchosegError,
    ValidationError,
    UsageError,
    ConfigurationError,
    DataIOError,
    ParseError,
    StructuralError,
    AlignmentError,
    DomainError,
    BoundsError,
    NumericalError,
    InterpolationError,
    DegenerateLineError,
    ManifestMissingError,
    ShardIndexError,
    CheckpointError,
    DuplicateRegionError,
    NonFiniteGradientError,
    EmptyDatasetError,
    UndefinedStatisticError,
)

__all__ = [
    "EchosegError",
    "ValidationError",
    "UsageError",
    "ConfigurationError",
    "DataIOError",
    "ParseError",
    "StructuralError",
    "AlignmentError",
    "DomainError",
    "BoundsError",
    "NumericalError",
    "InterpolationError",
    "DegenerateLineError",
    "ManifestMissingError",
    "ShardIndexError",
    "CheckpointError",
    "DuplicateRegionError",
    "NonFiniteGradientError",
    "EmptyDatasetError",
    "UndefinedStatisticError",
]

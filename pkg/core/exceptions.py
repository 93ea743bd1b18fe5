"""
Custom exception hierarchy for echoseg.

All exceptions inherit from EchosegError, which carries a process exit code, a
machine-readable error code, a human-readable message and optional details.
Domain-specific exceptions inherit from the appropriate family (ParseError,
StructuralError, DomainError, ...).

Usage:
    raise DegenerateLineError()
    raise ParseError("Bad depth on line 7")
    raise ShardIndexError(details={"index": 12, "count": 3})
"""

from typing import Any, Optional


class EchosegError(Exception):
    """
    Base echoseg exception.

    The CLI error handler converts these into a log record and an exit status.

    Attributes:
        exit_code: Process exit status reported by the CLI
        error_code: Machine-readable error identifier
        message: Human-readable error message
        details: Additional error context (optional)
    """

    exit_code: int = 1
    error_code: str = "internal_error"
    message: str = "An unexpected error occurred"

    def __init__(
        self,
        message: Optional[str] = None,
        details: Optional[Any] = None,
    ):
        self.message = message or self.__class__.message
        self.details = details
        super().__init__(self.message)


# Base families

class ValidationError(EchosegError, ValueError):
    """Input failed validation."""
    exit_code = 2
    error_code = "validation_error"
    message = "Validation failed"


class UsageError(EchosegError):
    """Command or API used out of order or with conflicting options."""
    exit_code = 2
    error_code = "usage_error"
    message = "Invalid usage"


class ConfigurationError(EchosegError, ValueError):
    """Configuration is invalid or incomplete."""
    exit_code = 2
    error_code = "configuration_error"
    message = "Invalid configuration"


class DataIOError(EchosegError, OSError):
    """Input file missing or unreadable."""
    exit_code = 1
    error_code = "io_error"
    message = "Input/output error"


class ParseError(EchosegError, ValueError):
    """A record in a data file could not be parsed."""
    exit_code = 1
    error_code = "parse_error"
    message = "Could not parse file"


class StructuralError(EchosegError, ValueError):
    """A data file or array has the wrong overall structure."""
    exit_code = 1
    error_code = "structural_error"
    message = "Unexpected structure"


class AlignmentError(EchosegError, ValueError):
    """Two inputs that must share a grid do not."""
    exit_code = 1
    error_code = "alignment_error"
    message = "Inputs are not aligned"


class DomainError(EchosegError, ValueError):
    """Argument outside the domain of an operation."""
    exit_code = 1
    error_code = "domain_error"
    message = "Argument out of domain"


class BoundsError(EchosegError, IndexError):
    """Index out of range."""
    exit_code = 1
    error_code = "bounds_error"
    message = "Index out of range"


class NumericalError(EchosegError, ArithmeticError):
    """Numerical failure (non-finite values, undefined statistics)."""
    exit_code = 1
    error_code = "numerical_error"
    message = "Numerical failure"


# Domain-specific exceptions

class InterpolationError(StructuralError):
    """A ping cannot be interpolated onto the common grid."""
    error_code = "interpolation_impossible"
    message = "Ping has a single sample; cannot interpolate"


class DegenerateLineError(DomainError):
    """Every point of a line was rejected."""
    error_code = "degenerate_line"
    message = "Every point of the line was flagged as anomalous"


class ManifestMissingError(StructuralError):
    """Shard store has no manifest."""
    error_code = "manifest_missing"
    message = "Shard manifest not found"


class ShardIndexError(BoundsError):
    """Shard index out of range."""
    error_code = "shard_index_out_of_range"
    message = "Shard index out of range"


class CheckpointError(StructuralError):
    """Checkpoint manifest and payload disagree."""
    error_code = "checkpoint_error"
    message = "Checkpoint payload does not match its manifest"


class DuplicateRegionError(ValidationError):
    """Two regions share an id."""
    error_code = "duplicate_region_id"
    message = "Region ids must be unique"


class NonFiniteGradientError(NumericalError):
    """A gradient contains NaN or infinity."""
    error_code = "non_finite_gradient"
    message = "Non-finite gradient; step rejected"


class EmptyDatasetError(ConfigurationError):
    """A dataset used for training has no shards."""
    error_code = "empty_dataset"
    message = "Dataset contains no shards"


class UndefinedStatisticError(NumericalError):
    """A statistic has an empty denominator."""
    error_code = "undefined_statistic"
    message = "No pings remain after exclusions"

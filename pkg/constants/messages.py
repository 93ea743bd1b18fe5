"""
User-facing messages and error strings.

Centralized so that the CLI, the exception defaults and the tests agree on wording.
"""


class ErrorMessages:
    """Error messages reported to the user."""

    # Parsing
    MALFORMED_ROW = "Malformed row {row} in {path}: {reason}"
    INCONSISTENT_COLUMNS = "Row {row} in {path} has {found} columns, expected {expected}"
    EMPTY_DATA = "No pings found in {path}"
    MISSING_HEADER = "Missing header row in {path}"
    COUNT_MISMATCH = "Header declares {declared} records but {found} were found in {path}"
    INVALID_STATUS = "Invalid line status {status} on line {row} of {path}"

    # Shard store / checkpoints
    MANIFEST_MISSING = "Shard manifest not found in {directory}"
    SHARD_OUT_OF_RANGE = "Shard index {index} out of range (0..{count})"
    CHECKPOINT_MISMATCH = "Checkpoint payload does not match its manifest"

    # Preprocessing
    INTERPOLATION_IMPOSSIBLE = "Ping {ping} has a single sample; cannot interpolate"
    GRID_MISMATCH = "Raw and clean recordings do not share a depth grid and ping count"
    DEGENERATE_LINE = "Every point of the line was flagged as anomalous"

    # Training
    NON_FINITE_GRADIENT = "Non-finite gradient in parameter {name}; step rejected"
    EMPTY_DATASET = "Dataset {name} contains no shards"

    # Evaluation
    NO_INCLUDED_PINGS = "No pings remain after exclusions"
    SHAPE_MISMATCH = "Masks differ in shape: {a} vs {b}"
    NO_FILES = "No recordings to aggregate"
    MISSING_PREDICTION = "No {kind} line predicted for {name} (expected {path})"

    # CLI
    INPUT_NOT_FOUND = "Input not found: {path}"
    NO_MODEL = "No model checkpoint given; pass --model or set ECHOSEG_MODEL_PATH"

    # Internal
    INTERNAL_ERROR = "An unexpected error occurred"


class SuccessMessages:
    """Summary lines logged when a command finishes."""

    SHARDS_WRITTEN = "Wrote {count} shards to {directory}"
    CHECKPOINT_SAVED = "Saved checkpoint {path}"
    ANNOTATION_WRITTEN = "Wrote annotations for {path}"
    REPORT_WRITTEN = "Wrote evaluation report to {path}"
    CORPUS_WRITTEN = "Wrote {count} synthetic recordings to {directory}"
    PLOT_WRITTEN = "Wrote plot {path}"

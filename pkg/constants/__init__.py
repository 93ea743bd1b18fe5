"""Constants module for the application."""

from constants.messages import ErrorMessages, SuccessMessages
from constants.defaults import (
    NAN_INDICATOR,
    SHARD_LENGTH,
    INPUT_WIDTH,
    INPUT_HEIGHT,
    N_PLANES,
    MISSING_FILL_VALUE,
)

__all__ = [
    "ErrorMessages",
    "SuccessMessages",
    "NAN_INDICATOR",
    "SHARD_LENGTH",
    "INPUT_WIDTH",
    "INPUT_HEIGHT",
    "N_PLANES",
    "MISSING_FILL_VALUE",
]

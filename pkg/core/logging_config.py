"""Logging setup shared by the CLI and scripts."""

import logging

TIMESTAMP_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
PLAIN_FORMAT = "%(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str = "INFO", timestamps: bool = True) -> None:
    """
    Configure root logging once per process.

    Args:
        level: Level name (DEBUG, INFO, WARNING, ...)
        timestamps: Prefix records with the wall-clock time. Off for reproducible logs.
    """
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=TIMESTAMP_FORMAT if timestamps else PLAIN_FORMAT,
        force=True,
    )

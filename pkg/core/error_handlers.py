"""
Exception handling for command-line entry points.

Converts EchosegError and its subclasses into a consistent log record and a process
exit status, so every subcommand reports failures the same way.
"""

import logging

from constants.messages import ErrorMessages
from core.exceptions import EchosegError

logger = logging.getLogger(__name__)


def handle_echoseg_error(exc: EchosegError) -> int:
    """
    Log an EchosegError and return its exit status.

    Args:
        exc: The exception that was raised

    Returns:
        Process exit status
    """
    log_message = f"{exc.error_code}: {exc.message}"
    if exc.details:
        log_message += f" | Details: {exc.details}"

    if exc.exit_code >= 2 or isinstance(exc, (OSError, ValueError)):
        logger.warning(log_message)
    else:
        logger.error(log_message, exc_info=True)

    return exc.exit_code


def handle_unexpected_error(exc: Exception) -> int:
    """
    Log an unexpected exception without hiding the traceback.

    Args:
        exc: The exception that was raised

    Returns:
        Process exit status (always 1)
    """
    logger.error(f"{ErrorMessages.INTERNAL_ERROR}: {exc}", exc_info=True)
    return 1


def handle_exception(exc: BaseException) -> int:
    """Dispatch to the right handler and return the exit status."""
    if isinstance(exc, EchosegError):
        return handle_echoseg_error(exc)
    if isinstance(exc, FileNotFoundError):
        logger.warning(ErrorMessages.INPUT_NOT_FOUND.format(path=exc.filename))
        return 1
    if isinstance(exc, Exception):
        return handle_unexpected_error(exc)
    raise exc

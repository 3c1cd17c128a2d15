"""Logging setup for the uqrank command line."""
import logging

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "uqrank"


def configure_logging(verbose: bool = False, console: Console | None = None) -> logging.Logger:
    """Attach a single RichHandler to the package logger.

    Calling this twice replaces the handler instead of stacking a second one.

    Args:
        verbose: Log at DEBUG instead of INFO
        console: Console to log to (defaults to stderr)

    Returns:
        The configured ``uqrank`` logger.
    """
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False
    return logger

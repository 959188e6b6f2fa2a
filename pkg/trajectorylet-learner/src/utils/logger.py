"""Logging configuration for the trajectorylet learner

Provides one console format shared by the CLI, the workflow nodes and the
test scripts.
"""

import logging
import os
import sys
from typing import Optional

BASE_LOGGER_NAME = "trajectorylet"


def setup_logger(
    name: str = BASE_LOGGER_NAME,
    level: Optional[str] = None,
    format_string: Optional[str] = None
) -> logging.Logger:
    """Set up a logger with the project console format.

    This sets up the root logger or a base logger that all child loggers inherit from.

    Args:
        name: Logger name (use "" for root logger)
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL); falls back to LOG_LEVEL env
        format_string: Custom format string (optional)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name if name else None)
    level = level or os.getenv("LOG_LEVEL", "INFO")
    log_level = getattr(logging, level.upper(), logging.INFO)

    # Only attach a handler once; level can still be changed on re-entry
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)

        if format_string is None:
            format_string = '%(asctime)s [%(levelname)s] %(name)s - %(message)s'

        formatter = logging.Formatter(
            format_string,
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

        if not name:
            logger.propagate = False

    logger.setLevel(log_level)
    for handler in logger.handlers:
        handler.setLevel(log_level)

    return logger

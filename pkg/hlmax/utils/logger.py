"""
Logging Configuration
One handler set on the package logger; module loggers inherit its level
"""
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Union

PACKAGE = "hlmax"

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def _level_number(level: str) -> int:
    return getattr(logging, str(level).upper(), logging.INFO)


def package_logger(log_file: Optional[Path] = None) -> logging.Logger:
    """
    The hlmax package logger, with its handlers attached on first use

    Output goes to stderr, so CSV and JSON written to stdout stay parseable.
    HLMAX_LOG_FILE (or log_file) adds a file handler.

    Args:
        log_file: Optional file path for logging

    Returns:
        Package logger
    """
    root = logging.getLogger(PACKAGE)
    if root.handlers:
        return root

    root.setLevel(_level_number(os.getenv("LOG_LEVEL", "INFO")))
    root.propagate = False
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(formatter)
    root.addHandler(console)

    env_file = os.getenv("HLMAX_LOG_FILE")
    log_file = log_file or (Path(env_file) if env_file else None)
    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    return root


def setup_logger(name: str, level: Optional[str] = None, log_file: Optional[Path] = None) -> logging.Logger:
    """
    Module logger under the package logger

    Args:
        name: Logger name (usually __name__)
        level: Pin this logger to a level instead of inheriting the package level
        log_file: Optional file path, honored on the first call only

    Returns:
        Configured logger
    """
    package_logger(log_file)
    if name != PACKAGE and not name.startswith(PACKAGE + "."):
        name = f"{PACKAGE}.{name}"

    logger = logging.getLogger(name)
    if level:
        logger.setLevel(_level_number(level))
    return logger


class LoggerContext:
    """
    Context manager for temporary log level changes
    """

    def __init__(self, logger: Union[logging.Logger, str], level: str):
        """
        Args:
            logger: Logger or logger name to modify
            level: Temporary log level
        """
        self.logger = logging.getLogger(logger) if isinstance(logger, str) else logger
        self.new_level = _level_number(level)
        self.old_level = self.logger.level

    def __enter__(self):
        self.logger.setLevel(self.new_level)
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.logger.setLevel(self.old_level)

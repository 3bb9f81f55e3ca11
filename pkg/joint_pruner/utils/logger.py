import logging
import sys
from copy import copy

import click

PACKAGE_LOGGER = "joint_pruner"

LEVEL_COLOURS = {
    logging.DEBUG: "cyan",
    logging.INFO: "green",
    logging.WARNING: "yellow",
    logging.ERROR: "red",
    logging.CRITICAL: "bright_red",
}


def get_formatted_logger(level: int | str = logging.INFO) -> logging.Logger:
    """Return the package logger with a colourised console handler attached once."""
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)

    if not any(getattr(handler, "_joint_pruner_console", False) for handler in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(DefaultFormatter(
            "%(levelprefix)s [%(asctime)s] %(message)s",
            datefmt="%H:%M:%S"
        ))
        handler._joint_pruner_console = True
        logger.addHandler(handler)

    # Child loggers (joint_pruner.rl.search, ...) report through this one only
    logger.propagate = False

    return logger


class DefaultFormatter(logging.Formatter):
    """
    Console formatter for pipeline runs.

    `%(levelprefix)s` expands to the level name padded to a fixed width, coloured
    when the stream is a terminal, so episode lines from a long search stay aligned.
    """

    def __init__(self, fmt: str | None = None, datefmt: str | None = None, use_colors: bool | None = None):
        super().__init__(fmt=fmt, datefmt=datefmt)
        self.use_colors = sys.stderr.isatty() if use_colors is None else use_colors

    def formatMessage(self, record: logging.LogRecord) -> str:
        record = copy(record)
        padding = " " * max(0, 8 - len(record.levelname))
        level = record.levelname
        if self.use_colors and record.levelno in LEVEL_COLOURS:
            level = click.style(level, fg=LEVEL_COLOURS[record.levelno])
        record.__dict__["levelprefix"] = level + ":" + padding
        return super().formatMessage(record)

"""Log formatting for the command line and for library users who want the same layout"""

import logging
import os
import traceback
from datetime import datetime
from types import TracebackType
from typing import TypeAlias

from curvflow.config import LOG_LEVEL_ENV

SysExcInfoType: TypeAlias = tuple[type[BaseException], BaseException, TracebackType | None] | tuple[None, None, None]


class LogFormatter(logging.Formatter):
    """
    Single-line log formatter.

    Each entry reads ``<time> - <level> - <logger> - <message>``. When a record
    carries an exception, its traceback is appended after ``| Exception:`` with
    the line breaks replaced by pipes.
    """

    def format(self, record: logging.LogRecord) -> str:
        """
        Render a record on one line.

        Args:
            record: The record to render.

        Returns:
            str: The log line.
        """
        log_entry = f"{self.formatTime(record)} - {record.levelname} - {record.name} - {record.getMessage()}"

        if record.exc_info:
            tb = self.formatException(record.exc_info)
            tb = " | ".join(line.strip() for line in tb.split("\n") if line.strip())
            log_entry += f" | Exception: {tb}"

        return log_entry

    def formatTime(self, record: logging.LogRecord, datefmt: str | None = None) -> str:
        """
        Creation time of a record, to the millisecond.

        Args:
            record: The record being rendered.
            datefmt: Ignored.

        Returns:
            ISO 8601 local time with a space between date and time.
        """
        return datetime.fromtimestamp(record.created).isoformat(sep=" ", timespec="milliseconds")

    def formatException(self, ei: SysExcInfoType) -> str:
        """
        Full traceback of an exception.

        Args:
            ei: ``sys.exc_info()`` style triple.

        Returns:
            str: The traceback text without trailing whitespace.
        """
        return "".join(traceback.format_exception(*ei)).strip()


def level_from_env(default: int = logging.WARNING) -> int:
    """Resolve the log level named by CURVFLOW_LOG_LEVEL.

    Args:
        default: Level used when the variable is unset or not a known level name.

    Returns:
        A logging level number.
    """
    name = os.environ.get(LOG_LEVEL_ENV, "").strip().upper()
    level = logging.getLevelName(name) if name else default
    return level if isinstance(level, int) else default


def setup_logging(level: int = logging.INFO) -> None:
    """
    Route every curvflow logger to standard error through :class:`LogFormatter`.

    Handlers already installed on the root logger are replaced, so calling this
    twice does not duplicate lines.

    Args:
        level: Root logger level.
    """
    handler = logging.StreamHandler()
    handler.setFormatter(LogFormatter())

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers = [handler]

"""
Line-oriented run logging.

Context is passed as keyword arguments and rendered as `key=value` pairs after
the message. Arrays are summarised by shape and dtype, never dumped.
"""
import logging
import sys
from typing import Any, Optional

import numpy as np

from viraliency.core.config import get_settings


def setup_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once per process."""
    log_level = level or get_settings().log_level

    logging.basicConfig(
        level=getattr(logging, log_level),
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
        handlers=[logging.StreamHandler(sys.stdout)],
        force=True
    )

    logging.getLogger("PIL").setLevel(logging.WARNING)


def _format_value(value: Any) -> str:
    if isinstance(value, np.ndarray):
        if value.size == 1:
            return _format_value(value.item())
        return f"array{tuple(value.shape)}:{value.dtype}"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


class RunLogger:
    """
    Logger wrapper that renders keyword context as `key=value` pairs.

    Usage:
        logger = get_run_logger(__name__)
        logger.info("Training step", iteration=100, loss=0.31)
    """

    def __init__(self, name: str):
        self._logger = logging.getLogger(name)

    @staticmethod
    def _format_context(context: dict[str, Any]) -> str:
        return " | ".join(f"{key}={_format_value(value)}" for key, value in context.items())

    def _emit(self, level: int, message: str, context: dict[str, Any]) -> None:
        if not self._logger.isEnabledFor(level):
            return
        ctx = self._format_context(context)
        self._logger.log(level, f"{message} | {ctx}" if ctx else message)

    def info(self, message: str, **context: Any) -> None:
        self._emit(logging.INFO, message, context)

    def warning(self, message: str, **context: Any) -> None:
        self._emit(logging.WARNING, message, context)

    def error(
        self,
        message: str,
        error_code: Optional[str] = None,
        **context: Any
    ) -> None:
        """Log an error, putting the error code first in the context."""
        if error_code:
            context = {"error_code": error_code, **context}
        self._emit(logging.ERROR, message, context)

    def debug(self, message: str, **context: Any) -> None:
        self._emit(logging.DEBUG, message, context)


def get_run_logger(name: str) -> RunLogger:
    """Get a context-formatting logger instance."""
    return RunLogger(name)

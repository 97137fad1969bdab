from __future__ import annotations

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any

import numpy as np
import structlog

# Keep handlers small and safe by default.
_MAX_BYTES = 10_485_760  # 10 MB
_BACKUP_COUNT = 3
_HANDLER_MARK = "_vorstab_handler"
_CONFIGURED = False


def _coerce_level(level: str | int) -> int:
    if isinstance(level, int):
        return level
    return logging.getLevelNamesMapping().get(level.upper(), logging.INFO)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return repr(value)


def _shared_processors() -> list[Any]:
    return [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True, key="timestamp"),
    ]


def _formatter() -> logging.Formatter:
    return structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=_shared_processors(),
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.processors.JSONRenderer(default=_json_default),
        ],
    )


def _has_handler_for_path(root: logging.Logger, path: Path) -> bool:
    for handler in root.handlers:
        base = getattr(handler, "baseFilename", None)
        if base is not None and Path(base) == path.resolve():
            return True
    return False


def _attach_file_handler(root: logging.Logger, log_file: Path, level: int) -> None:
    log_file.parent.mkdir(parents=True, exist_ok=True)
    if _has_handler_for_path(root, log_file):
        return
    file_handler = RotatingFileHandler(
        log_file, maxBytes=_MAX_BYTES, backupCount=_BACKUP_COUNT, encoding="utf-8"
    )
    file_handler.setLevel(level)
    file_handler.setFormatter(_formatter())
    setattr(file_handler, _HANDLER_MARK, True)
    root.addHandler(file_handler)


def configure_structlog(
    level: str | int = "INFO", log_file: str | Path | None = None
) -> None:
    """Configure JSON logging to stderr and an optional rotating file. Idempotent.

    Parameters
    ----------
    level:
        Logging level name or number applied to the root logger and handlers.
    log_file:
        Optional path of a JSON-lines log file; attached at most once.
    """

    global _CONFIGURED
    level_value = _coerce_level(level)
    root = logging.getLogger()

    if not _CONFIGURED:
        structlog.configure(
            processors=[
                *_shared_processors(),
                structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
            ],
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=False,
        )
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(level_value)
        console.setFormatter(_formatter())
        setattr(console, _HANDLER_MARK, True)
        root.addHandler(console)
        root.setLevel(level_value)
        _CONFIGURED = True

    if log_file:
        _attach_file_handler(root, Path(log_file), level_value)


def get_logger(**bindings: Any) -> structlog.stdlib.BoundLogger:
    """Return a structlog logger bound to ``bindings``."""

    if not _CONFIGURED:
        configure_structlog()
    # Lazy proxy: processors are resolved per call, so module-level loggers
    # follow later reconfiguration.
    return structlog.stdlib.get_logger("vorstab", **bindings)


def reset_structlog() -> None:
    """Drop vorstab handlers and structlog configuration."""

    global _CONFIGURED
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, _HANDLER_MARK, False):
            root.removeHandler(handler)
            handler.close()
    structlog.reset_defaults()
    _CONFIGURED = False

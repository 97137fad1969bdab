from vorstab.logging.structlog_config import (
    configure_structlog,
    get_logger,
    reset_structlog,
)

__all__ = [
    "configure_structlog",
    "get_logger",
    "reset_structlog",
]

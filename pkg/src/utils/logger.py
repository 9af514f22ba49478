import sys
from pathlib import Path
from typing import Literal, Optional, Union
from loguru import logger

# Global namespace for all loggers
BASE_LOGGER_NAMESPACE = "newsclf"

# Initialization guard to prevent duplicate configuration
_configured = False

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def get_logger(name: str) -> "logger":
    """
    Returns a loguru logger bound with the given module name.

    Example: get_logger("trainer") → logger with module="newsclf.trainer"

    Note: loguru uses a single global logger; binding adds contextual
    information without creating separate logger instances.
    """
    return logger.bind(module=f"{BASE_LOGGER_NAMESPACE}.{name}")


def configure_logging(
    level: LogLevel = "INFO",
    log_file: Optional[Union[str, Path]] = None,
) -> None:
    """
    Configures loguru globally for the entire app.

    Should be called once (the CLI entry point does it).
    Subsequent calls are no-ops to prevent duplicate handlers.

    Args:
        level: Logging level as a string.
        log_file: Optional path of a rotating file sink for long runs.
    """
    global _configured
    if _configured:
        return

    # Remove default loguru handler
    logger.remove()

    logger.add(
        sys.stderr,
        format="<level>{level: <8}</level> | <cyan>{extra[module]}</cyan> | {message}",
        level=level,
        colorize=True,
        filter=lambda record: "module" in record["extra"],
    )

    # Fallback handler for loggers without module binding
    logger.add(
        sys.stderr,
        format="<level>{level: <8}</level> | {message}",
        level=level,
        colorize=True,
        filter=lambda record: "module" not in record["extra"],
    )

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_file),
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[module]} | {message}",
            level=level,
            rotation="10 MB",
            retention="30 days",
            filter=lambda record: "module" in record["extra"],
        )

    _configured = True

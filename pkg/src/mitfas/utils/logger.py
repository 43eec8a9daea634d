# src/mitfas/utils/logger.py
import logging
import os
from typing import Optional

LOGGER_NAME = "MITFAS"


# Configure logger
def setup_logger(log_file: Optional[str] = None, console_level: int = logging.INFO) -> logging.Logger:
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG)  # Capture all log levels

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    # Avoid duplicate console handlers if logger is already configured
    if not any(getattr(h, "_mitfas_console", False) for h in logger.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setLevel(console_level)
        console_handler.setFormatter(formatter)
        console_handler._mitfas_console = True
        logger.addHandler(console_handler)

    log_file = log_file or os.getenv("MITFAS_LOG_FILE")
    if log_file:
        attach_file_handler(logger, log_file, formatter)

    return logger


def attach_file_handler(logger: logging.Logger, log_file: str, formatter: Optional[logging.Formatter] = None) -> Optional[logging.Handler]:
    """Add a DEBUG file handler for `log_file` unless one is already attached."""
    target = os.path.abspath(log_file)
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename == target:
            return handler
    try:
        file_handler = logging.FileHandler(target, encoding="utf-8")
    except OSError as e:
        logger.warning(f"Error setting up file handler for {target}: {e}. Using console only.")
        return None
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter or logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    ))
    logger.addHandler(file_handler)
    return file_handler


def detach_handler(logger: logging.Logger, handler: Optional[logging.Handler]) -> None:
    if handler is None:
        return
    logger.removeHandler(handler)
    handler.close()


def get_logger(module: str) -> logging.Logger:
    """Child logger, e.g. MITFAS.alignment."""
    return logging.getLogger(f"{LOGGER_NAME}.{module}")

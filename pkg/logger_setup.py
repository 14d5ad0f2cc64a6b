"""
logger_setup.py
Logger setup for ReproMC.
"""

import logging
from pathlib import Path
from typing import Optional, Union

ROOT_LOGGER = "repromc"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def get_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    """Loggers live under the ``repromc`` namespace; the root one gets a stderr handler once."""
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    root = logging.getLogger(ROOT_LOGGER)
    if not root.handlers:
        root.setLevel(logging.INFO)
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.propagate = False
    return logging.getLogger(name)


def configure_logging(level: str = "INFO", log_file: Optional[Union[str, Path]] = None) -> logging.Logger:
    root = get_logger()
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    if log_file:
        path = Path(log_file)
        already = any(
            isinstance(h, logging.FileHandler) and Path(h.baseFilename) == path.resolve()
            for h in root.handlers
        )
        if not already:
            path.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(path)
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root.addHandler(file_handler)
    return root

"""
Logging utilities for bklab
Every module logger is a child of the "bklab" package logger, which owns the
console and daily file handlers
"""
import logging
import os
from datetime import datetime
from typing import Optional

from config import config

ROOT_LOGGER = "bklab"

CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(threadName)s - %(filename)s:%(lineno)d - %(message)s'


def _child_name(name: str) -> str:
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return name
    if name.startswith("src."):
        name = name[len("src."):]
    return f"{ROOT_LOGGER}.{name}"


def _configure_root(level: int) -> logging.Logger:
    root = logging.getLogger(ROOT_LOGGER)

    # Avoid duplicate handlers
    if root.handlers:
        return root
    root.setLevel(logging.DEBUG)
    root.propagate = False

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    root.addHandler(console_handler)

    os.makedirs(config.LOG_DIR, exist_ok=True)
    log_filename = os.path.join(config.LOG_DIR, f"bklab_{datetime.now().strftime('%Y%m%d')}.log")
    file_handler = logging.FileHandler(log_filename, encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
    root.addHandler(file_handler)
    return root


def setup_logger(name: str = ROOT_LOGGER, level: Optional[int] = None) -> logging.Logger:
    """
    Logger for a bklab module

    Args:
        name: Module name; "src." prefixes are folded into the bklab namespace
        level: Console level (defaults to config.LOG_LEVEL)

    Returns:
        Logger named bklab.<module>
    """
    if level is None:
        level = getattr(logging, config.LOG_LEVEL.upper(), logging.INFO)
    _configure_root(level)
    return logging.getLogger(_child_name(name))

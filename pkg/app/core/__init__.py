"""
Core application modules for configuration, logging, and error handling.
"""

from .config import (
    settings,
    validate_settings,
    load_train_config,
    load_model_params,
    load_pid_gains,
)
from .logging import setup_logging, get_logger

__all__ = [
    "settings",
    "validate_settings",
    "load_train_config",
    "load_model_params",
    "load_pid_gains",
    "setup_logging",
    "get_logger",
]

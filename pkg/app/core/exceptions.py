"""
Domain exceptions and the command-line error handler.

Every error raised by the simulator, the learners or the harness derives
from BlimpError and carries the process exit code the CLI should return.
"""

import json
import sys
from datetime import datetime, timezone
from traceback import format_exc
from typing import Optional, TextIO

from app.core.logging import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class BlimpError(Exception):
    """Base exception for all domain errors."""

    exit_code: int = EXIT_FAILURE


# Dynamics


class DynamicsError(BlimpError):
    """Base exception for vehicle model failures."""


class GimbalLockError(DynamicsError):
    """Raised when pitch gets within 1e-3 rad of +/- pi/2."""


class NumericBlowupError(DynamicsError):
    """Raised when a state component is non-finite or exceeds 1e6."""


class NonPdMassError(DynamicsError):
    """Raised when the generalized mass matrix is not positive definite."""

    exit_code = EXIT_USAGE


class InvalidControlError(DynamicsError):
    """Raised when a thrust command is outside [0, f_max]."""


# Task


class TaskError(BlimpError):
    """Base exception for goal/reward errors."""


class DegenerateGoalError(TaskError):
    """Raised when the goal is at the origin or the vehicle sits on the goal."""


# Neural networks


class NetworkError(BlimpError):
    """Base exception for the neural-network stack."""


class ShapeMismatchError(NetworkError):
    """Raised when an input or gradient does not match the expected shape."""


class NoTapeError(NetworkError):
    """Raised when backward is called without a recorded forward pass."""


# Evaluation


class EvaluationError(BlimpError):
    """Base exception for the evaluation harness."""


class EmptyTrajectoryError(EvaluationError):
    """Raised when a metric is requested for a record without steps."""


class UnknownControllerError(EvaluationError):
    """Raised when a controller kind is not one of the supported five."""

    exit_code = EXIT_USAGE


# Persistence / configuration / training


class CheckpointError(BlimpError):
    """Base exception for checkpoint persistence."""


class CheckpointVersionMismatchError(CheckpointError):
    """Raised when a checkpoint was written by an incompatible format version."""

    exit_code = EXIT_USAGE


class ConfigError(BlimpError):
    """Raised when a configuration file is missing or fails validation."""

    exit_code = EXIT_USAGE


class TrainingDivergedError(BlimpError):
    """Raised when too many recent training episodes diverged."""

    exit_code = EXIT_DIVERGED


def error_payload(exc: BaseException, exit_code: int) -> dict:
    """Build the machine-readable error document printed by the CLI."""
    error_type = type(exc).__name__
    message = str(exc)
    return {
        "error": f"{error_type}: {message}" if message else error_type,
        "error_type": error_type,
        "exit_code": exit_code,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def handle_cli_exception(exc: BaseException, stream: Optional[TextIO] = None) -> int:
    """
    Translate an exception into an exit code and a JSON error line.

    Domain errors are logged as warnings (usage problems) or errors
    (runtime failures); anything else is treated as unhandled and logged
    with its traceback.

    Args:
        exc: The exception raised by a command
        stream: Where to write the JSON payload (defaults to stderr)

    Returns:
        Process exit code
    """
    stream = stream or sys.stderr

    if isinstance(exc, BlimpError):
        exit_code = exc.exit_code
        logger.log(
            "WARNING" if exit_code == EXIT_USAGE else "ERROR",
            f"{type(exc).__name__}: {exc}",
        )
    else:
        exit_code = EXIT_FAILURE
        logger.error(f"Unhandled exception: {type(exc).__name__}")
        logger.error(f"  - Message: {exc}")
        logger.error(f"  - Traceback: {format_exc()}")

    print(json.dumps(error_payload(exc, exit_code)), file=stream)
    return exit_code

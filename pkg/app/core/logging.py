"""
Logging configuration using Loguru.

Console output for interactive runs, a rotating application log, and a
filtered training log that only receives records bound with train_log=True.
"""

import contextvars
import sys
from pathlib import Path
from typing import Optional
from uuid import uuid4

from loguru import logger

# Context variable for the identifier of the current training/evaluation run
run_id_var = contextvars.ContextVar("run_id", default=None)


def setup_logging(
    log_level: str = "INFO",
    environment: str = "development",
    log_dir: Optional[Path] = None,
) -> None:
    """
    Configure Loguru for the application.

    Args:
        log_level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        environment: Environment name (development, ci, production)
        log_dir: Directory for file sinks; no file sinks when None
    """
    # Remove default handler
    logger.remove()

    # Console handler - always present
    logger.add(
        sys.stderr,
        format="<level>{time:YYYY-MM-DD HH:mm:ss}</level> | "
               "<level>{level: <8}</level> | "
               "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
               "<level>{message}</level>",
        level=log_level,
        colorize=environment == "development",
    )

    if log_dir is None:
        logger.debug(f"Logging initialized - Environment: {environment}, Level: {log_level}")
        return

    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)

    # General application log
    logger.add(
        log_dir / "app.log",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
        level="INFO",
        rotation="50 MB",
        retention=5,
    )

    # Training progress log
    logger.add(
        log_dir / "training.log",
        format="{time:YYYY-MM-DD HH:mm:ss} | {extra[run_id]} | {level: <8} | {message}",
        level="INFO",
        rotation="50 MB",
        retention=5,
        filter=lambda record: record["extra"].get("train_log", False),
    )

    logger.info(f"Logging initialized - Environment: {environment}, Level: {log_level}")


def get_logger(name: Optional[str] = None):
    """
    Get a logger instance.

    Usage:
        from app.core.logging import get_logger
        logger = get_logger(__name__)
        logger.info("Message")

    Args:
        name: Optional logger name (usually __name__)

    Returns:
        Logger instance
    """
    if name:
        return logger.bind(name=name)
    return logger


def get_run_id() -> str:
    """Get the current run ID or create a new one."""
    run_id = run_id_var.get()
    if not run_id:
        run_id = str(uuid4())[:8]
        run_id_var.set(run_id)
    return run_id


def set_run_id(run_id: str) -> None:
    """Set the run ID for the current context."""
    run_id_var.set(run_id)


def _train_logger():
    return logger.bind(train_log=True, run_id=get_run_id())


def log_episode(
    episode: int,
    stage: str,
    c: float,
    episode_return: float,
    termination: str,
    steps: int,
) -> None:
    """
    Log a completed training episode.

    Args:
        episode: Episode index j
        stage: "stage1" or "stage2"
        c: Slider configuration used for the episode, meters
        episode_return: Discounted task return R(c; zeta)
        termination: Termination cause
        steps: Number of control steps executed
    """
    _train_logger().info(
        f"Episode {episode} | {stage} | c: {c * 100:+.2f} cm | "
        f"Return: {episode_return:.3f} | End: {termination} | Steps: {steps}"
    )


def log_outer_update(
    iteration: int,
    step_size: float,
    objective: float,
    beta: float,
) -> None:
    """Log one outer (slider policy) update."""
    _train_logger().info(
        f"Outer update {iteration} | eta: {step_size:.2e} | "
        f"Objective: {objective:.4f} | beta: {beta:.4f}"
    )


def log_evaluation(
    episode: int,
    mean_return: float,
    goal_rate: float,
    bias_proxy: Optional[float] = None,
) -> None:
    """Log a periodic deterministic evaluation."""
    bias_str = f" | Bias proxy: {bias_proxy:.4f}" if bias_proxy is not None else ""
    _train_logger().info(
        f"Evaluation @ {episode} | Mean return: {mean_return:.3f} | "
        f"Goal rate: {goal_rate:.2f}{bias_str}"
    )

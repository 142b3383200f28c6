"""
Persistence for checkpoints, training metrics and evaluation artifacts.
"""

from .checkpoint_repo import CheckpointRepository
from .metrics_repo import MetricsRepository
from .report_repo import ReportRepository

__all__ = ["CheckpointRepository", "MetricsRepository", "ReportRepository"]

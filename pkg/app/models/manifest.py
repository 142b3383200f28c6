"""Run manifest written into every output directory."""

from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, Field

from app import __version__

RUN_LAYOUT = {
    "manifest": "manifest.json",
    "metrics": "metrics.jsonl",
    "summary": "summary.json",
    "checkpoints": "checkpoints",
    "report": "report.json",
    "trials_csv": "trials.csv",
    "trajectories": "trajectories",
}


class RunManifest(BaseModel):
    """Resolved configuration snapshot, seeds, version and directory layout."""

    command: str
    artifact_version: str = __version__
    seed: int
    config: dict[str, Any] = Field(description="Exact configuration used by the run")
    layout: dict[str, str] = Field(default_factory=lambda: dict(RUN_LAYOUT))
    checkpoint: Optional[str] = None
    created_at: Optional[datetime] = Field(None, description="UTC time the command started")

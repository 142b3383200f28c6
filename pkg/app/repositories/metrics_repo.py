"""
Repository for training metrics: an append-only JSON-lines log plus a summary.

Every line carries a "kind" ("episode", "outer_update" or "evaluation").
Records contain no wall-clock values so identical seeds give identical files.
"""

import json
from pathlib import Path
from typing import Any, Iterator, Optional

from pydantic import BaseModel

from app.core.logging import get_logger

logger = get_logger(__name__)


def _dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True)


class MetricsRepository:
    """Writes metrics.jsonl and summary.json in a run directory."""

    def __init__(self, metrics_path: Path, summary_path: Optional[Path] = None):
        self.metrics_path = Path(metrics_path)
        self.summary_path = Path(summary_path) if summary_path else self.metrics_path.with_name("summary.json")

    def reset(self) -> None:
        """Start an empty log (a rerun into the same directory replaces it)."""
        self.metrics_path.parent.mkdir(parents=True, exist_ok=True)
        self.metrics_path.write_text("", encoding="utf-8")

    def append(self, kind: str, record: dict[str, Any] | BaseModel) -> None:
        if isinstance(record, BaseModel):
            record = record.model_dump(mode="json")
        line = _dumps({"kind": kind, **record})
        with self.metrics_path.open("a", encoding="utf-8") as f:
            f.write(line + "\n")

    def read(self, kind: Optional[str] = None) -> list[dict[str, Any]]:
        return list(self.iter_records(kind))

    def iter_records(self, kind: Optional[str] = None) -> Iterator[dict[str, Any]]:
        if not self.metrics_path.exists():
            return
        with self.metrics_path.open(encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                record = json.loads(line)
                if kind is None or record.get("kind") == kind:
                    yield record

    def write_summary(self, summary: dict[str, Any] | BaseModel) -> Path:
        if isinstance(summary, BaseModel):
            summary = summary.model_dump(mode="json")
        self.summary_path.parent.mkdir(parents=True, exist_ok=True)
        self.summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Summary written: {self.summary_path}")
        return self.summary_path

"""
Repository for evaluation artifacts and run manifests.

Writes EvalReport JSON, the per-trial CSV, per-episode trajectory CSVs, and
the manifest stored in every run directory.
"""

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from app.core.exceptions import EvaluationError
from app.core.logging import get_logger
from app.models.evaluation import EvalReport
from app.models.manifest import RUN_LAYOUT, RunManifest
from app.models.training import EpisodeRecord
from app.services.task import cross_track_error

logger = get_logger(__name__)

TRIAL_COLUMNS = [
    "controller", "zeta_x", "zeta_y", "zeta_z", "trial", "c", "rmse", "termination", "time_to_goal",
]
TRAJECTORY_COLUMNS = ["t", "x", "y", "z", "phi", "theta", "psi", "f_l", "f_r", "e_trk"]


class ReportRepository:
    """File layout of one output directory."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def _path(self, key: str) -> Path:
        return self.out_dir / RUN_LAYOUT[key]

    def write_manifest(self, manifest: RunManifest) -> Path:
        path = self._path("manifest")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.debug(f"Manifest written: {path}")
        return path

    def read_manifest(self) -> RunManifest:
        return RunManifest.model_validate_json(self._path("manifest").read_text(encoding="utf-8"))

    def write_report(self, report: EvalReport, path: Optional[Path] = None) -> Path:
        path = Path(path) if path else self._path("report")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"Evaluation report written: {path}")
        return path

    def read_report(self, path: Optional[Path] = None) -> EvalReport:
        path = Path(path) if path else self._path("report")
        if not path.exists():
            raise EvaluationError(f"report not found: {path}")
        return EvalReport.model_validate_json(path.read_text(encoding="utf-8"))

    def write_trials_csv(self, report: EvalReport, path: Optional[Path] = None) -> Path:
        path = Path(path) if path else self._path("trials_csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRIAL_COLUMNS)
            for controller in report.controllers:
                for trial in controller.trials:
                    writer.writerow([
                        trial.controller,
                        repr(trial.zeta[0]),
                        repr(trial.zeta[1]),
                        repr(trial.zeta[2]),
                        trial.trial,
                        repr(trial.c),
                        repr(trial.rmse),
                        trial.termination.value,
                        "" if trial.time_to_goal is None else repr(trial.time_to_goal),
                    ])
        logger.debug(f"Trial table written: {path}")
        return path

    def trajectory_path(self, name: str) -> Path:
        return self._path("trajectories") / f"{name}.csv"

    def write_trajectory_csv(self, record: EpisodeRecord, name: str) -> Path:
        """One row per control step: t, position, attitude, applied thrust, e_trk."""
        path = self.trajectory_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRAJECTORY_COLUMNS)
            for step in record.steps:
                s = step.state
                writer.writerow([repr(v) for v in (
                    step.t, s[0], s[1], s[2], s[3], s[4], s[5],
                    step.action[0], step.action[1], step.e_trk,
                )])
        return path


def read_trajectory_csv(path: Path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV as float arrays."""
    with Path(path).open(newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return {col: np.array([float(r[col]) for r in rows]) for col in TRAJECTORY_COLUMNS}


def rmse_from_trajectory(columns: dict[str, np.ndarray], zeta) -> float:
    """Recompute cross-track RMSE from raw positions."""
    positions = np.stack([columns["x"], columns["y"], columns["z"]], axis=1)
    errors = np.array([cross_track_error(p, zeta) for p in positions])
    return float(np.sqrt(np.mean(errors ** 2)))


def dump_json(data, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path

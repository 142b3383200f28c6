"""
Records produced by the training loop.

Transition and OuterSample are numpy-backed dataclasses held in memory by
the learners; StepSample and EpisodeRecord are pydantic models because they
are written to metrics files and reports.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from app.models.task import Termination

STATE_DIM = 16
ACTION_DIM = 2


class Stage(str, Enum):
    """Phase of the two-stage schedule."""

    STAGE1 = "stage1"
    STAGE2 = "stage2"


class EpisodeMode(str, Enum):
    """Whether an episode feeds the learner."""

    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class Transition:
    """One replay record; state layout is [p(3), e(3), v_b(3), w_b(3), zeta(3), c(1)]."""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass(frozen=True)
class OuterSample:
    """Goal, sampled slider, its log-probability and the realized task return."""

    zeta: np.ndarray
    c: float
    log_prob: float
    episode_return: float


class StepSample(BaseModel):
    """One logged control step."""

    t: float
    state: list[float] = Field(description="12-vector [p, e, v_b, w_b] after the step")
    action: list[float] = Field(description="[f_l, f_r], newtons")
    reward: float
    e_trk: float


class EpisodeRecord(BaseModel):
    """Everything needed to replay the metrics of one episode."""

    episode: int = -1
    stage: Optional[Stage] = None
    zeta: tuple[float, float, float]
    c: float
    termination: Termination
    gamma: float
    episode_return: float
    steps: list[StepSample] = Field(default_factory=list)

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def duration(self) -> float:
        return self.steps[-1].t if self.steps else 0.0

    def positions(self) -> np.ndarray:
        return np.array([s.state[0:3] for s in self.steps]).reshape(-1, 3)

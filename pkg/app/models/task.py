"""Goal, reward and termination models for the goal-directed tracking task."""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class Goal(BaseModel):
    """Target position zeta and goal-ball radius r_g, meters."""

    model_config = ConfigDict(frozen=True)

    zeta: tuple[float, float, float]
    r_g: float = Field(0.2, gt=0)

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.zeta, dtype=float)


class Termination(str, Enum):
    """Episode status after a control step."""

    RUNNING = "running"
    GOAL_REACHED = "goal_reached"
    TIMEOUT = "timeout"
    DIVERGED = "diverged"

    @property
    def is_terminal(self) -> bool:
        return self is not Termination.RUNNING

    @property
    def cuts_bootstrap(self) -> bool:
        """Whether the transition is stored with done=True."""
        return self in (Termination.GOAL_REACHED, Termination.DIVERGED)


class StepReward(BaseModel):
    """Shaped reward and its components for one control step."""

    model_config = ConfigDict(frozen=True)

    r: float
    e_trk: float = Field(ge=0)
    e_head: float = Field(ge=0)
    delta_d: float
    bonus: float = 0.0

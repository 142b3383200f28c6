"""
Evaluation protocol models: the 27-goal grid, per-trial results and reports.
"""

from itertools import product
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.models.task import Termination

GRID_X = (4.0, 4.5, 5.0)
GRID_Y = (-2.0, 0.0, 2.0)
GRID_Z = (-1.0, 0.0, 1.0)

# Height groups in report order; z is positive down, so negative-z targets are climbs
GROUP_ORDER = ("climb", "level", "descent", "overall")

CONTROLLER_KINDS = ("bilevel", "sac-fixed:-5", "sac-fixed:0", "sac-fixed:5", "pid-spg")


class GoalGrid(BaseModel):
    """Evaluation targets; defaults to the 3 x 3 x 3 protocol grid."""

    goals: list[tuple[float, float, float]] = Field(
        default_factory=lambda: [g for g in product(GRID_X, GRID_Y, GRID_Z)]
    )

    @model_validator(mode="after")
    def unique_goals(self) -> "GoalGrid":
        if len(set(self.goals)) != len(self.goals):
            raise ValueError("goal grid contains duplicate targets")
        return self

    def __len__(self) -> int:
        return len(self.goals)


def height_group(zeta: tuple[float, float, float]) -> str:
    """Map a target to its height group by the sign of z."""
    z = zeta[2]
    if z < -1e-9:
        return "climb"
    if z > 1e-9:
        return "descent"
    return "level"


class TrialResult(BaseModel):
    """One evaluation rollout."""

    controller: str
    zeta: tuple[float, float, float]
    trial: int
    c: float
    rmse: float
    termination: Termination
    time_to_goal: Optional[float] = None

    @property
    def group(self) -> str:
        return height_group(self.zeta)


class GroupStats(BaseModel):
    """Mean and population standard deviation of trial RMSEs."""

    mean: float
    std: float
    count: int


class ControllerReport(BaseModel):
    """All trials of one controller with the height-grouped statistics."""

    controller: str
    trials: list[TrialResult]
    groups: dict[str, GroupStats]
    goal_rate: float = Field(description="Fraction of trials ending GoalReached")


class EvalReport(BaseModel):
    """Merged evaluation output for one or more controllers."""

    version: int = 1
    seed: int
    trials_per_goal: int
    grid: GoalGrid
    controllers: list[ControllerReport] = Field(default_factory=list)

    def controller(self, kind: str) -> ControllerReport:
        for report in self.controllers:
            if report.controller == kind:
                return report
        raise KeyError(kind)


class SliderTrend(BaseModel):
    """Mean selected slider per height group plus the full goal -> c map."""

    mean_c_climb: float
    mean_c_level: float
    mean_c_descent: float
    by_goal: list[tuple[tuple[float, float, float], float]]


class SymmetryPair(BaseModel):
    zeta: tuple[float, float, float]
    mirror: tuple[float, float, float]
    asymmetry: float


class SymmetryReport(BaseModel):
    """Slider-choice asymmetry over goals mirrored in y (y = 0 excluded)."""

    pairs: list[SymmetryPair]
    mean: float
    max: float

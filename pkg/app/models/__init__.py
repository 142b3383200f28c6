"""Data models for the blimp control stack."""

from .config import (
    BiasPair,
    EnvConfig,
    PidGains,
    RandomizationConfig,
    RewardWeights,
    SacConfig,
    SpgConfig,
    TrainConfig,
    Workspace,
)
from .evaluation import (
    ControllerReport,
    EvalReport,
    GoalGrid,
    GroupStats,
    SliderTrend,
    SymmetryReport,
    TrialResult,
)
from .manifest import RunManifest
from .params import AeroCoefficients, ModelParams
from .state import BlimpState, ControlInput, SliderConfig
from .task import Goal, StepReward, Termination
from .training import EpisodeRecord, OuterSample, Stage, StepSample, Transition

__all__ = [
    # Config
    "BiasPair",
    "EnvConfig",
    "PidGains",
    "RandomizationConfig",
    "RewardWeights",
    "SacConfig",
    "SpgConfig",
    "TrainConfig",
    "Workspace",
    # Vehicle
    "AeroCoefficients",
    "ModelParams",
    "BlimpState",
    "ControlInput",
    "SliderConfig",
    # Task
    "Goal",
    "StepReward",
    "Termination",
    # Training
    "EpisodeRecord",
    "OuterSample",
    "Stage",
    "StepSample",
    "Transition",
    # Evaluation
    "ControllerReport",
    "EvalReport",
    "GoalGrid",
    "GroupStats",
    "SliderTrend",
    "SymmetryReport",
    "TrialResult",
    "RunManifest",
]

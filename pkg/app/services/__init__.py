"""
Service layer: vehicle dynamics, task, learners, trainer, baselines and evaluation.
"""

from .dynamics import randomize_params, step, vehicle_model
from .task import check_termination, cross_track_error, sample_goal, step_reward
from .environment import BlimpEnv
from .sac import ReplayBuffer, SacAgent
from .spg import OuterPolicy
from .trainer import BilevelTrainer, rollout, train
from .baselines import PidController
from .evalharness import build_controller, evaluate

__all__ = [
    "randomize_params",
    "step",
    "vehicle_model",
    "check_termination",
    "cross_track_error",
    "sample_goal",
    "step_reward",
    "BlimpEnv",
    "ReplayBuffer",
    "SacAgent",
    "OuterPolicy",
    "BilevelTrainer",
    "rollout",
    "train",
    "PidController",
    "build_controller",
    "evaluate",
]

"""
Straight-line goal tracking: reference geometry, shaped reward and termination.

The reference is the segment from the origin (episode start) to the goal zeta.
"""

from typing import Optional

import numpy as np

from app.core.exceptions import DegenerateGoalError
from app.models.config import RewardWeights, Workspace
from app.models.state import BlimpState
from app.models.task import Goal, StepReward, Termination
from app.services.dynamics import BLOWUP_LIMIT, GIMBAL_MARGIN

DEGENERATE_GOAL = 1e-9
STATIONARY_SPEED = 1e-3
AT_TARGET = 1e-3


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(3)


def cross_track_error(p, zeta) -> float:
    """
    Distance from p to the segment {lambda * zeta : lambda in [0, 1]}.

    Raises:
        DegenerateGoalError: If |zeta| < 1e-9
    """
    p, zeta = _vec(p), _vec(zeta)
    norm_sq = float(zeta @ zeta)
    if norm_sq < DEGENERATE_GOAL ** 2:
        raise DegenerateGoalError(f"goal {zeta.tolist()} is at the reference origin")
    lam = np.clip(float(p @ zeta) / norm_sq, 0.0, 1.0)
    return float(np.linalg.norm(p - lam * zeta))


def heading_error(v_inertial, p, zeta) -> float:
    """Angle in [0, pi] between the velocity and the direction to the goal; 0 when either is degenerate."""
    v = _vec(v_inertial)
    to_goal = _vec(zeta) - _vec(p)
    v_norm = np.linalg.norm(v)
    d_norm = np.linalg.norm(to_goal)
    if v_norm < STATIONARY_SPEED or d_norm < AT_TARGET:
        return 0.0
    cos_angle = np.clip(float(v @ to_goal) / (v_norm * d_norm), -1.0, 1.0)
    return float(np.arccos(cos_angle))


def forward_progress(p_prev, p, zeta) -> float:
    """Reduction of the distance to the goal between two consecutive positions."""
    zeta = _vec(zeta)
    return float(np.linalg.norm(_vec(p_prev) - zeta) - np.linalg.norm(_vec(p) - zeta))


def step_reward(
    p_prev,
    p,
    v_inertial,
    zeta,
    r_g: float,
    weights: Optional[RewardWeights] = None,
) -> StepReward:
    """
    Shaped reward r = w_trk*e_trk + w_head*e_head + w_prog*delta_d + bonus.

    Default weights are (-2, -1, +2) with a bonus of 20 inside the goal ball.

    Raises:
        DegenerateGoalError: If the goal is at the reference origin
    """
    weights = weights or RewardWeights()
    e_trk = cross_track_error(p, zeta)
    e_head = heading_error(v_inertial, p, zeta)
    delta_d = forward_progress(p_prev, p, zeta)
    reached = np.linalg.norm(_vec(p) - _vec(zeta)) <= r_g
    bonus = weights.goal_bonus if reached else 0.0
    r = weights.tracking * e_trk + weights.heading * e_head + weights.progress * delta_d + bonus
    return StepReward(r=r, e_trk=e_trk, e_head=e_head, delta_d=delta_d, bonus=bonus)


def check_termination(
    p,
    zeta,
    r_g: float,
    t: float,
    state: Optional[BlimpState] = None,
    horizon: float = 15.0,
    workspace: Optional[Workspace] = None,
) -> Termination:
    """
    Classify the episode after a control step.

    Divergence (non-finite or huge state, pitch at the Euler singularity,
    or leaving the flight box) takes priority over reaching the goal, which
    takes priority over the time limit.
    """
    p = _vec(p)
    box = (workspace or Workspace()).bounding_box
    if state is not None:
        x = state.as_vector()
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_LIMIT:
            return Termination.DIVERGED
        if abs(state.e[1]) >= np.pi / 2 - GIMBAL_MARGIN:
            return Termination.DIVERGED
    if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > box:
        return Termination.DIVERGED
    if np.linalg.norm(p - _vec(zeta)) <= r_g:
        return Termination.GOAL_REACHED
    # 1e-9 absorbs accumulated control_dt rounding
    if t >= horizon - 1e-9:
        return Termination.TIMEOUT
    return Termination.RUNNING


def sample_goal(rng_seed, workspace: Optional[Workspace] = None, r_g: float = 0.2) -> Goal:
    """Draw a goal uniformly from the workspace box (default x in [4, 5], y in [-2, 2], z in [-1, 1])."""
    workspace = workspace or Workspace()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    lows, highs = zip(workspace.x, workspace.y, workspace.z)
    zeta = rng.uniform(lows, highs)
    return Goal(zeta=tuple(float(z) for z in zeta), r_g=r_g)

"""
Comparison controllers: the PID-SPG cascade and fixed-slider SAC variants.

PID-SPG flies straight at the goal with two attitude loops. The pitch and
yaw moment commands are turned into thruster forces by inverting the
pitch/yaw rows of the thrust allocation, then a goal-dependent forward
feedforward is added and both forces are saturated.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.core.exceptions import DegenerateGoalError
from app.core.logging import get_logger
from app.models.config import PidGains
from app.models.params import ModelParams
from app.models.state import BlimpState, ControlInput
from app.models.task import Goal
from app.models.training import EpisodeRecord
from app.services.environment import BlimpEnv, wrap_angle
from app.services.sac import SacAgent
from app.services.trainer import rollout

logger = get_logger(__name__)


def attitude_references(p, zeta) -> tuple[float, float]:
    """
    Yaw and pitch pointing from p at the goal.

    psi_ref = atan2(e_y, e_x), theta_ref = atan2(-e_z, sqrt(e_x^2 + e_y^2)) for
    the unit error e (z down, so a goal above gives positive pitch).

    Raises:
        DegenerateGoalError: If |zeta - p| <= 1e-6
    """
    err = np.asarray(zeta, dtype=float) - np.asarray(p, dtype=float)
    dist = np.linalg.norm(err)
    if dist <= 1e-6:
        raise DegenerateGoalError("attitude references undefined at the target")
    ex, ey, ez = err / dist
    return float(np.arctan2(ey, ex)), float(np.arctan2(-ez, np.hypot(ex, ey)))


def moment_allocation(params: ModelParams) -> np.ndarray:
    """B_theta_psi: (f_l, f_r) -> (tau_theta, tau_psi)."""
    h, d = params.thruster_pitch_arm, params.thruster_arm
    return np.array([[h, h], [d, -d]])


def forces_for_moments(tau_theta: float, tau_psi: float, params: ModelParams) -> np.ndarray:
    """Solve B_theta_psi f = tau."""
    h, d = params.thruster_pitch_arm, params.thruster_arm
    return 0.5 * np.array([tau_theta / h + tau_psi / d, tau_theta / h - tau_psi / d])


def feedforward(zeta, gains: PidGains) -> float:
    """f_ff = k0 + k1 * |zeta| per thruster."""
    return gains.ff_offset + gains.ff_slope * float(np.linalg.norm(zeta))


@dataclass
class PidState:
    """Error integrals of the pitch and yaw loops (per episode)."""

    pitch_integral: float = 0.0
    yaw_integral: float = 0.0


def pid_control(
    state: BlimpState,
    refs: tuple[float, float],
    gains: PidGains,
    dt: float,
    zeta,
    params: ModelParams,
    memory: Optional[PidState] = None,
) -> ControlInput:
    """
    One PID-SPG command.

    Derivative action acts on the measured body rates (q, r), so zero error,
    zero integrals and zero rates give pure feedforward.

    Args:
        state: Current state
        refs: (psi_ref, theta_ref)
        gains: Loop gains, integrator clamp and feedforward
        dt: Control period, seconds
        zeta: Goal (for the feedforward)
        params: Model parameters (allocation and saturation)
        memory: Integrator state, updated in place

    Returns:
        Saturated thrust command
    """
    memory = memory if memory is not None else PidState()
    psi_ref, theta_ref = refs
    _, theta, psi = state.e
    _, q, r = state.w_b
    e_theta = theta_ref - theta
    e_psi = float(wrap_angle(psi_ref - psi))

    clamp = gains.integrator_clamp
    memory.pitch_integral = float(np.clip(memory.pitch_integral + e_theta * dt, -clamp, clamp))
    memory.yaw_integral = float(np.clip(memory.yaw_integral + e_psi * dt, -clamp, clamp))

    kp, ki, kd = gains.pitch
    tau_theta = kp * e_theta + ki * memory.pitch_integral - kd * q
    kp, ki, kd = gains.yaw
    tau_psi = kp * e_psi + ki * memory.yaw_integral - kd * r

    f = forces_for_moments(tau_theta, tau_psi, params) + feedforward(zeta, gains)
    return ControlInput.saturated(f[0], f[1], params.f_max)


class PidController:
    """Observation-driven PID-SPG controller with per-episode integrator state."""

    def __init__(self, gains: PidGains, params: ModelParams, zeta, dt: float):
        self.gains = gains
        self.params = params
        self.zeta = np.asarray(zeta, dtype=float)
        self.dt = dt
        self.memory = PidState()

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        state = BlimpState.from_vector(obs[:12])
        try:
            refs = attitude_references(state.p, self.zeta)
        except DegenerateGoalError:
            refs = (float(state.e[2]), 0.0)
        u = pid_control(state, refs, self.gains, self.dt, self.zeta, self.params, self.memory)
        return u.as_array()


def run_fixed_slider(
    agent: SacAgent,
    c_fixed: float,
    goals: Sequence[Goal],
    env: BlimpEnv,
    seed: int = 0,
) -> list[EpisodeRecord]:
    """Deterministic SAC rollouts with the slider pinned at c_fixed."""
    records = []
    for i, goal in enumerate(goals):
        records.append(rollout(
            env, goal, c_fixed, seed + i,
            lambda obs: agent.act(obs, deterministic=True),
            agent.config.gamma,
            episode=i,
        ))
    logger.debug(f"Fixed-slider rollouts at c={c_fixed:+.3f} m over {len(goals)} goals")
    return records

"""
Episode-level simulator: holds the thrust command over the physics substeps,
scores each control step and classifies termination.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.exceptions import DynamicsError
from app.core.logging import get_logger
from app.models.config import EnvConfig, RandomizationConfig
from app.models.params import ModelParams
from app.models.state import BlimpState, ControlInput, SliderConfig
from app.models.task import Goal, StepReward, Termination
from app.services import dynamics
from app.services.task import check_termination, step_reward

logger = get_logger(__name__)


def wrap_angle(angle):
    """Wrap to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def encode_observation(state: BlimpState, goal: Goal, c: float) -> np.ndarray:
    """Augmented state [p, e (yaw wrapped), v_b, w_b, zeta, c]."""
    e = state.e.copy()
    e[2] = float(wrap_angle(e[2]))
    return np.concatenate([state.p, e, state.v_b, state.w_b, goal.position, [c]])


def observation_scale(slider_max: float = 0.05) -> np.ndarray:
    """Divisors: positions 5, angles pi, velocities 1, goal 5, slider c_max."""
    return np.concatenate([
        np.full(3, 5.0),
        np.full(3, np.pi),
        np.ones(6),
        np.full(3, 5.0),
        [slider_max],
    ])


@dataclass
class StepOutcome:
    """Result of one control step."""

    observation: np.ndarray
    state: BlimpState
    reward: StepReward
    termination: Termination
    t: float
    control: ControlInput


class BlimpEnv:
    """Single-vehicle episode runner with per-episode randomization."""

    def __init__(
        self,
        params: Optional[ModelParams] = None,
        config: Optional[EnvConfig] = None,
        randomization: Optional[RandomizationConfig] = None,
    ):
        self.nominal_params = params or ModelParams()
        self.config = config or EnvConfig()
        self.randomization = randomization or RandomizationConfig()
        self.params = self.nominal_params
        self.state = BlimpState()
        self.goal: Optional[Goal] = None
        self.slider = SliderConfig()
        self.t = 0.0
        self.steps = 0
        self.termination = Termination.RUNNING

    @property
    def f_max(self) -> float:
        return self.nominal_params.f_max

    def reset(
        self,
        goal: Goal,
        c: float,
        seed: int,
        initial_state: Optional[BlimpState] = None,
    ) -> np.ndarray:
        """
        Start an episode with goal zeta and slider c held for its duration.

        Parameter and initial-state draws use independent streams of seed.
        """
        param_seed, state_seed = np.random.SeedSequence(seed).spawn(2)
        self.params = dynamics.randomize_params(
            self.nominal_params, param_seed, self.randomization
        )
        nominal = initial_state or BlimpState()
        self.state = dynamics.randomize_initial_state(nominal, state_seed, self.randomization)
        self.goal = goal
        self.slider = SliderConfig(c=c)
        self.t = 0.0
        self.steps = 0
        self.termination = Termination.RUNNING
        return self.observation()

    def observation(self) -> np.ndarray:
        return encode_observation(self.state, self.goal, self.slider.c)

    def step(self, action) -> StepOutcome:
        """
        Apply a thrust command for one control period.

        Commands are saturated to [0, f_max]. Dynamics failures end the
        episode as Diverged with the last valid state.
        """
        if self.goal is None:
            raise RuntimeError("reset() must be called before step()")
        if self.termination.is_terminal:
            raise RuntimeError(f"episode already ended ({self.termination.value})")

        a = np.asarray(action, dtype=float).reshape(2)
        u = ControlInput.saturated(a[0], a[1], self.params.f_max)
        p_prev = self.state.p.copy()
        diverged = False
        state = self.state
        try:
            for _ in range(self.config.substeps):
                state = dynamics.step(state, self.slider, u, self.params, self.config.physics_dt)
        except DynamicsError as e:
            logger.warning(f"Episode diverged at t={self.t:.2f}s: {e}")
            diverged = True

        self.state = state
        self.steps += 1
        self.t = self.steps * self.config.control_dt
        v_inertial = dynamics.rotation_matrix(state.e) @ state.v_b
        weights = self.config.reward
        if diverged:
            # no goal bonus on a failed step
            weights = weights.model_copy(update={"goal_bonus": 0.0})
        reward = step_reward(p_prev, state.p, v_inertial, self.goal.zeta, self.goal.r_g, weights)
        if diverged:
            self.termination = Termination.DIVERGED
        else:
            self.termination = check_termination(
                state.p,
                self.goal.zeta,
                self.goal.r_g,
                self.t,
                state,
                horizon=self.config.horizon,
                workspace=self.config.workspace,
            )
        return StepOutcome(
            observation=self.observation(),
            state=state,
            reward=reward,
            termination=self.termination,
            t=self.t,
            control=u,
        )


"""
Training, environment and controller configuration models.

All models reject unknown keys so a typo in a config file fails loudly
with a field-level message instead of being silently ignored.
"""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SLIDER_MIN = -0.05
SLIDER_MAX = 0.05


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Workspace(_Strict):
    """Goal sampling box and divergence bounding box, meters."""

    x: tuple[float, float] = Field((4.0, 5.0), description="Goal x range")
    y: tuple[float, float] = Field((-2.0, 2.0), description="Goal y range")
    z: tuple[float, float] = Field((-1.0, 1.0), description="Goal z range (z down)")
    bounding_box: float = Field(10.0, gt=0, description="Half-width of the flight box")

    @field_validator("x", "y", "z")
    @classmethod
    def ordered(cls, v: tuple[float, float]) -> tuple[float, float]:
        if v[0] > v[1]:
            raise ValueError(f"range lower bound {v[0]} exceeds upper bound {v[1]}")
        return v

    def contains(self, point) -> bool:
        """Check whether a point lies inside the goal sampling box."""
        return all(lo <= float(p) <= hi for p, (lo, hi) in zip(point, (self.x, self.y, self.z)))


class RewardWeights(_Strict):
    """Weights of the shaped reward r = w_trk*e_trk + w_head*e_head + w_prog*dd + bonus."""

    tracking: float = -2.0
    heading: float = -1.0
    progress: float = 2.0
    goal_bonus: float = 20.0


class RandomizationConfig(_Strict):
    """Per-episode domain randomization toggles and initial-state offsets."""

    params: bool = True
    initial_state: bool = True
    independent_buoyancy: bool = Field(
        False,
        description="Draw buoyancy independently of mass (otherwise share the mass factor)",
    )
    position_offset: float = Field(0.05, ge=0, description="Uniform bound, meters")
    attitude_offset_deg: float = Field(2.0, ge=0, description="Uniform bound, degrees")
    velocity_offset: float = Field(0.02, ge=0, description="Uniform bound on body linear velocity, m/s")
    rate_offset: float = Field(0.02, ge=0, description="Uniform bound on body angular rates, rad/s")


class EnvConfig(_Strict):
    """Episode timing, goal region and reward shaping."""

    physics_dt: float = Field(1.0 / 60.0, gt=0, le=0.05)
    substeps: int = Field(6, ge=1)
    horizon: float = Field(15.0, gt=0, description="Episode time limit, seconds")
    goal_radius: float = Field(0.2, gt=0)
    slider_min: float = Field(SLIDER_MIN, ge=SLIDER_MIN)
    slider_max: float = Field(SLIDER_MAX, le=SLIDER_MAX)
    workspace: Workspace = Field(default_factory=Workspace)
    reward: RewardWeights = Field(default_factory=RewardWeights)

    @model_validator(mode="after")
    def slider_range(self) -> "EnvConfig":
        if self.slider_min >= self.slider_max:
            raise ValueError("slider_min must be below slider_max")
        return self

    @property
    def control_dt(self) -> float:
        return self.physics_dt * self.substeps

    @property
    def max_steps(self) -> int:
        return int(round(self.horizon / self.control_dt))


class SacConfig(_Strict):
    """Inner-level Soft Actor-Critic hyperparameters."""

    gamma: float = Field(0.99, ge=0, le=1)
    polyak: float = Field(0.005, ge=0, le=1, description="Fraction of the online net")
    batch_size: int = Field(256, ge=1)
    critic_lr: float = Field(3e-4, gt=0)
    actor_lr: float = Field(3e-4, gt=0)
    alpha_lr: float = Field(3e-4, gt=0)
    initial_alpha: float = Field(0.2, gt=0)
    target_entropy: Optional[float] = Field(None, description="Defaults to -dim(a)")
    buffer_capacity: int = Field(1_000_000, ge=1)
    warmup_steps: int = Field(1000, ge=0)
    critic_hidden: int = Field(512, ge=1)
    actor_hidden: int = Field(128, ge=1)
    hidden_layers: int = Field(2, ge=1, le=4)


class SpgConfig(_Strict):
    """Outer-level soft policy gradient hyperparameters."""

    hidden: int = Field(64, ge=1)
    hidden_layers: int = Field(2, ge=1, le=4)
    batch_episodes: int = Field(8, ge=1)
    step_size_mode: Literal["constant", "robbins_monro", "power"] = "robbins_monro"
    eta0: float = Field(0.3, gt=0)
    power: float = Field(1.0, gt=0.5, le=1.0)
    beta_lr: float = Field(3e-4, gt=0)
    initial_beta: float = Field(0.05, gt=0)
    target_entropy: float = -1.0
    baseline_momentum: float = Field(0.9, ge=0, lt=1)
    normalize_advantage: bool = Field(True, description="Divide centered returns by their batch std")


class BiasPair(_Strict):
    """A (goal, slider) pair used by the bias diagnostic."""

    zeta: tuple[float, float, float]
    c: float = Field(ge=SLIDER_MIN, le=SLIDER_MAX)


def _default_bias_pairs() -> list[BiasPair]:
    pairs = [BiasPair(zeta=(4.5, 0.0, 0.0), c=0.0)]
    for x in (4.0, 5.0):
        for y in (-2.0, 2.0):
            for z in (-1.0, 1.0):
                pairs.append(BiasPair(zeta=(x, y, z), c=SLIDER_MIN if z < 0 else SLIDER_MAX))
    return pairs


def _default_eval_goals() -> list[tuple[float, float, float]]:
    return [(4.5, y, z) for y in (-2.0, 0.0, 2.0) for z in (-1.0, 0.0, 1.0)]


class TrainConfig(_Strict):
    """Complete configuration of a two-stage training run."""

    total_episodes: int = Field(30000, ge=1, description="M")
    stage1_episodes: int = Field(15000, ge=0, description="N")
    seed: int = 0
    env: EnvConfig = Field(default_factory=EnvConfig)
    sac: SacConfig = Field(default_factory=SacConfig)
    spg: SpgConfig = Field(default_factory=SpgConfig)
    randomization: RandomizationConfig = Field(default_factory=RandomizationConfig)
    eval_interval: int = Field(100, ge=1)
    checkpoint_interval: int = Field(1000, ge=1)
    divergence_window: int = Field(200, ge=1)
    divergence_threshold: float = Field(0.5, gt=0, le=1)
    eval_goals: list[tuple[float, float, float]] = Field(default_factory=_default_eval_goals)
    bias_pairs: list[BiasPair] = Field(default_factory=_default_bias_pairs)

    @model_validator(mode="after")
    def stage_split(self) -> "TrainConfig":
        if self.stage1_episodes >= self.total_episodes:
            raise ValueError(
                f"stage1_episodes ({self.stage1_episodes}) must be below "
                f"total_episodes ({self.total_episodes})"
            )
        return self


PRESETS: dict[str, dict] = {
    "paper": {"total_episodes": 30000, "stage1_episodes": 15000},
    "desk": {"total_episodes": 3000, "stage1_episodes": 1500},
}


class PidGains(_Strict):
    """Gains and feedforward of the PID-SPG baseline."""

    pitch: tuple[float, float, float] = Field((0.004, 0.0005, 0.006), description="kp, ki, kd")
    yaw: tuple[float, float, float] = Field((0.08, 0.001, 0.03), description="kp, ki, kd")
    integrator_clamp: float = Field(0.5, gt=0, description="Bound on each error integral, rad*s")
    ff_offset: float = Field(0.035, description="k0 of f_ff = k0 + k1*|zeta|, newtons")
    ff_slope: float = Field(0.006, description="k1 of f_ff, newtons per meter")

    @field_validator("pitch", "yaw")
    @classmethod
    def finite_gains(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        if not all(abs(g) < float("inf") for g in v):
            raise ValueError("gains must be finite")
        return v

"""
Vehicle state, slider configuration and thrust command value types.

BlimpState is a frozen dataclass over numpy vectors rather than a pydantic
model: it is created four times per RK4 step and never crosses a file
boundary on its own.
"""

from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.config import SLIDER_MAX, SLIDER_MIN

# Components negated by the lateral (y -> -y) mirror, in 12-vector layout
# [x y z | phi theta psi | u v w | p q r].
MIRROR_SIGNS = np.array([1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1], dtype=float)


def _vec3(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class BlimpState:
    """
    Full kinematic/dynamic state.

    p: inertial position (m), e: roll/pitch/yaw (rad, yaw unwrapped),
    v_b: body linear velocity (m/s), w_b: body angular velocity (rad/s).
    """

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v_b: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name in ("p", "e", "v_b", "w_b"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "BlimpState":
        x = np.asarray(x, dtype=float)
        if x.shape != (12,):
            raise ValueError(f"expected a 12-vector, got shape {x.shape}")
        return cls(p=x[0:3].copy(), e=x[3:6].copy(), v_b=x[6:9].copy(), w_b=x[9:12].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.e, self.v_b, self.w_b])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))

    def mirrored(self) -> "BlimpState":
        """Reflect through the x-z plane: negate y, roll, yaw, v, p, r."""
        return BlimpState.from_vector(self.as_vector() * MIRROR_SIGNS)

    @property
    def nu(self) -> np.ndarray:
        """Generalized velocity [v_b, w_b]."""
        return np.concatenate([self.v_b, self.w_b])


class SliderConfig(BaseModel):
    """Episode-wise slider position along the body x axis, meters."""

    model_config = ConfigDict(frozen=True)

    c: float = Field(0.0, ge=SLIDER_MIN, le=SLIDER_MAX)


@dataclass(frozen=True)
class ControlInput:
    """Left and right thruster forces, newtons."""

    f_l: float = 0.0
    f_r: float = 0.0

    @classmethod
    def from_array(cls, a) -> "ControlInput":
        a = np.asarray(a, dtype=float).reshape(-1)
        return cls(f_l=float(a[0]), f_r=float(a[1]))

    @classmethod
    def saturated(cls, f_l: float, f_r: float, f_max: float) -> "ControlInput":
        return cls(
            f_l=float(np.clip(f_l, 0.0, f_max)),
            f_r=float(np.clip(f_r, 0.0, f_max)),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.f_l, self.f_r])

    def swapped(self) -> "ControlInput":
        return ControlInput(f_l=self.f_r, f_r=self.f_l)

    def within(self, f_max: float, tol: float = 1e-12) -> bool:
        return -tol <= self.f_l <= f_max + tol and -tol <= self.f_r <= f_max + tol

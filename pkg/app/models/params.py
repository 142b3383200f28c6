"""
Vehicle model parameters.

Units are SI throughout. The body frame is x forward, y right, z down, with
its origin at the rigid-body center of mass (slider excluded).
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator


class AeroCoefficients(BaseModel):
    """Aerodynamic coefficient set of the envelope, wings and tail."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    drag: tuple[float, float, float] = Field(
        (0.8, 3.0, 4.0), description="Quadratic drag coefficients along body x, y, z"
    )
    lift_slope: float = Field(2.0, ge=0, description="Lift coefficient per rad of angle of attack")
    rate_damping: tuple[float, float, float] = Field(
        (0.03, 0.06, 0.04), description="Linear damping of p, q, r, N*m*s/rad"
    )
    pitch_stiffness: float = Field(0.3, ge=0, description="Restoring pitch moment per rad of AoA")
    yaw_stiffness: float = Field(0.4, ge=0, description="Weathercock yaw moment per rad of sideslip")
    reference_area: float = Field(0.4, gt=0, description="m^2")
    reference_length: float = Field(1.0, gt=0, description="m")

    @field_validator("drag", "rate_damping")
    @classmethod
    def non_negative(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(c < 0 for c in v):
            raise ValueError("coefficients must be non-negative")
        return v


class ModelParams(BaseModel):
    """
    Inertial, buoyancy, aerodynamic, actuation and slider-geometry parameters.

    The nominal values ship in config/model_params.json. They are a plausible
    set for a 1.0 x 1.1 x 0.5 m envelope, chosen so that hover is neutral, a
    rearward slider trims the vehicle nose-up (forward: nose-down), and top
    speed is close to 1 m/s.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    m_body: float = Field(0.24, gt=0, description="Rigid-body mass, kg")
    m_slider: float = Field(0.06, gt=0, description="Movable gondola mass, kg")
    buoyancy: float = Field(2.943, gt=0, description="Buoyant force, N")
    inertia_diag: tuple[float, float, float] = Field(
        (0.020, 0.030, 0.035), description="Principal moments of the body, kg*m^2"
    )
    added_mass_diag: tuple[float, float, float, float, float, float] = Field(
        (0.05, 0.20, 0.25, 0.004, 0.012, 0.012),
        description="Added mass (kg) and added inertia (kg*m^2)",
    )
    r_cb: tuple[float, float, float] = Field(
        (0.0, 0.0, -0.02), description="Center of buoyancy in the body frame, m"
    )
    slider_axis_offset: tuple[float, float] = Field(
        (0.0, 0.10), description="Fixed (y_s, z_s) of the slider rail, m"
    )
    aero: AeroCoefficients = Field(default_factory=AeroCoefficients)
    thruster_arm: float = Field(0.15, gt=0, description="Lateral arm of each thruster, m")
    thruster_pitch_arm: float = Field(
        0.01, description="Thrust line offset below the body origin, m"
    )
    f_max: float = Field(0.1, gt=0, description="Per-thruster saturation, N")
    gravity: float = Field(9.81, gt=0)
    air_density: float = Field(1.225, gt=0)
    rand_aero_frac: float = Field(0.10, ge=0, lt=1)
    rand_mass_frac: float = Field(0.05, ge=0, lt=1)

    @field_validator("inertia_diag")
    @classmethod
    def positive_inertia(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(i <= 0 for i in v):
            raise ValueError("principal moments of inertia must be strictly positive")
        return v

    @field_validator("added_mass_diag")
    @classmethod
    def non_negative_added_mass(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(m < 0 for m in v):
            raise ValueError("added-mass terms must be non-negative")
        return v

    @property
    def total_mass(self) -> float:
        return self.m_body + self.m_slider

    @property
    def weight(self) -> float:
        return self.total_mass * self.gravity

    def neutral(self) -> "ModelParams":
        """Copy with buoyancy set exactly equal to the weight."""
        return self.model_copy(update={"buoyancy": self.weight})

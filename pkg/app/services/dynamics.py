"""
Control-oriented 6-DoF blimp model with a slider-dependent center of mass.

    p_dot = R(e) v_b,    e_dot = J(e) w_b
    M(c) nu_dot = B(c) F - C(nu, c) nu - g(e, c) - d_a(nu)

Frames: inertial x forward / y right / z down, body x nose / y starboard /
z down, Z-Y-X (yaw-pitch-roll) Euler angles. M(c) is diagonal: rigid-body
mass and inertia, slider parallel-axis terms, and added mass. C(nu, c) is
the Kirchhoff cross-product form of that M, g(e, c) is the weight acting at
the composite CoM against buoyancy at the CoB, d_a is quadratic drag, lift
linear in angle of attack, static stability moments and linear rate
damping, and B maps (f_l, f_r) to surge, pitch and yaw.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from app.core.exceptions import (
    GimbalLockError,
    InvalidControlError,
    NonPdMassError,
    NumericBlowupError,
)
from app.core.logging import get_logger
from app.models.config import RandomizationConfig
from app.models.params import AeroCoefficients, ModelParams
from app.models.state import BlimpState, ControlInput, SliderConfig

logger = get_logger(__name__)

GIMBAL_MARGIN = 1e-3
BLOWUP_LIMIT = 1e6
MAX_DT = 0.05


def rotation_matrix(e: np.ndarray) -> np.ndarray:
    """Body-to-inertial rotation R(e) for Z-Y-X Euler angles (roll, pitch, yaw)."""
    phi, theta, psi = e
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.array([
        [ct * cp, sf * st * cp - cf * sp, cf * st * cp + sf * sp],
        [ct * sp, sf * st * sp + cf * cp, cf * st * sp - sf * cp],
        [-st, sf * ct, cf * ct],
    ])


def euler_rate_matrix(e: np.ndarray) -> np.ndarray:
    """
    Euler-rate transform J(e) with e_dot = J(e) w_b.

    Raises:
        GimbalLockError: If |pitch| >= pi/2 - 1e-3
    """
    phi, theta, _ = e
    if abs(theta) >= np.pi / 2 - GIMBAL_MARGIN:
        raise GimbalLockError(f"pitch {theta:.6f} rad is within {GIMBAL_MARGIN} of +/- pi/2")
    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    return np.array([
        [1.0, sf * tt, cf * tt],
        [0.0, cf, -sf],
        [0.0, sf / ct, cf / ct],
    ])


@dataclass(frozen=True)
class VehicleModel:
    """Quantities of the model that depend only on (params, c)."""

    mass_diag: np.ndarray
    r_g: np.ndarray
    r_cb: np.ndarray
    weight: float
    buoyancy: float
    allocation: np.ndarray
    aero: AeroCoefficients
    half_rho_s: float

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.mass_diag)


def composite_cg(params: ModelParams, c: float) -> np.ndarray:
    """Center of mass of body plus slider; the body origin is the rigid-body CoM."""
    y_s, z_s = params.slider_axis_offset
    return params.m_slider * np.array([c, y_s, z_s]) / params.total_mass


def allocation_matrix(params: ModelParams, c: float = 0.0) -> np.ndarray:
    """
    B(c): 6x2 map from (f_l, f_r) to the generalized force.

    Both thrusters push along body x; the left one sits at y = -arm, so it
    yaws the nose right. B is constant in c with the current geometry; the
    argument is kept so a slider-mounted thrust line can be modeled later.
    """
    d = params.thruster_arm
    h = params.thruster_pitch_arm
    return np.array([
        [1.0, 1.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [0.0, 0.0],
        [h, h],
        [d, -d],
    ])


@lru_cache(maxsize=4096)
def vehicle_model(params: ModelParams, c: float) -> VehicleModel:
    """
    Build the (params, c)-dependent model and check M(c) is positive definite.

    Raises:
        NonPdMassError: If the assembled mass matrix fails a Cholesky factorization
    """
    y_s, z_s = params.slider_axis_offset
    m = params.total_mass
    added = np.asarray(params.added_mass_diag, dtype=float)
    inertia = np.asarray(params.inertia_diag, dtype=float) + params.m_slider * np.array([
        y_s ** 2 + z_s ** 2,
        c ** 2 + z_s ** 2,
        c ** 2 + y_s ** 2,
    ])
    mass_diag = np.concatenate([np.full(3, m), inertia]) + added

    try:
        np.linalg.cholesky(np.diag(mass_diag))
    except np.linalg.LinAlgError as e:
        raise NonPdMassError(f"M(c) is not positive definite for c={c}: {mass_diag}") from e
    if not np.all(mass_diag > 0):
        raise NonPdMassError(f"M(c) is not positive definite for c={c}: {mass_diag}")

    return VehicleModel(
        mass_diag=mass_diag,
        r_g=composite_cg(params, c),
        r_cb=np.asarray(params.r_cb, dtype=float),
        weight=params.weight,
        buoyancy=params.buoyancy,
        allocation=allocation_matrix(params, c),
        aero=params.aero,
        half_rho_s=0.5 * params.air_density * params.aero.reference_area,
    )


def coriolis_term(nu: np.ndarray, mass_diag: np.ndarray) -> np.ndarray:
    """C(nu, c) nu for a diagonal M: [w x P ; w x L + v x P]."""
    v, w = nu[:3], nu[3:]
    lin_mom = mass_diag[:3] * v
    ang_mom = mass_diag[3:] * w
    return np.concatenate([np.cross(w, lin_mom), np.cross(w, ang_mom) + np.cross(v, lin_mom)])


def restoring_term(e: np.ndarray, model: VehicleModel) -> np.ndarray:
    """g(e, c): the negated gravity-buoyancy wrench in the body frame."""
    phi, theta, _ = e
    down = np.array([-np.sin(theta), np.sin(phi) * np.cos(theta), np.cos(phi) * np.cos(theta)])
    force = (model.weight - model.buoyancy) * down
    moment = model.weight * np.cross(model.r_g, down) - model.buoyancy * np.cross(model.r_cb, down)
    return -np.concatenate([force, moment])


def aero_term(nu: np.ndarray, model: VehicleModel) -> np.ndarray:
    """d_a(nu): aerodynamic resistance, opposing motion (left-hand side convention)."""
    u, v, w = nu[:3]
    rates = nu[3:]
    aero = model.aero
    q_s = model.half_rho_s
    l_ref = aero.reference_length

    speed_sq = u * u + v * v + w * w
    alpha = np.arctan2(w, u) if speed_sq > 0.0 else 0.0
    beta = np.arcsin(np.clip(v / np.sqrt(speed_sq), -1.0, 1.0)) if speed_sq > 0.0 else 0.0

    cd = aero.drag
    force = q_s * np.array([cd[0] * u * abs(u), cd[1] * v * abs(v), cd[2] * w * abs(w)])
    # lift acts along -z_b for positive alpha
    force[2] += q_s * aero.lift_slope * alpha * speed_sq

    moment = np.asarray(aero.rate_damping) * rates
    moment[1] += q_s * l_ref * aero.pitch_stiffness * alpha * speed_sq
    moment[2] -= q_s * l_ref * aero.yaw_stiffness * beta * speed_sq
    return np.concatenate([force, moment])


def assemble_dynamics(
    state: BlimpState,
    cfg: SliderConfig,
    params: ModelParams,
    u: Optional[ControlInput] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Assemble M(c) and the generalized force residual.

    Args:
        state: Current vehicle state
        cfg: Slider configuration
        params: Model parameters
        u: Thrust command (zero thrust when omitted)

    Returns:
        (M, rhs) with rhs = B(c)F - C(nu, c)nu - g(e, c) - d_a(nu)

    Raises:
        NonPdMassError: If M(c) is not positive definite
    """
    model = vehicle_model(params, float(cfg.c))
    thrust = np.zeros(2) if u is None else u.as_array()
    return model.mass_matrix, _residual(state.nu, state.e, thrust, model)


def _residual(nu: np.ndarray, e: np.ndarray, thrust: np.ndarray, model: VehicleModel) -> np.ndarray:
    return (
        model.allocation @ thrust
        - coriolis_term(nu, model.mass_diag)
        - restoring_term(e, model)
        - aero_term(nu, model)
    )


def _derivative(x: np.ndarray, thrust: np.ndarray, model: VehicleModel) -> np.ndarray:
    e, nu = x[3:6], x[6:12]
    p_dot = rotation_matrix(e) @ nu[:3]
    e_dot = euler_rate_matrix(e) @ nu[3:]
    nu_dot = _residual(nu, e, thrust, model) / model.mass_diag
    return np.concatenate([p_dot, e_dot, nu_dot])


def step(
    state: BlimpState,
    cfg: SliderConfig,
    u: ControlInput,
    params: ModelParams,
    dt: float,
) -> BlimpState:
    """
    Advance the 12-dimensional state by one RK4 step.

    Raises:
        ValueError: If dt is outside (0, 0.05]
        InvalidControlError: If a thrust is outside [0, f_max]
        GimbalLockError: If any stage hits the Euler singularity
        NumericBlowupError: If the new state is non-finite or exceeds 1e6
    """
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    if not u.within(params.f_max):
        raise InvalidControlError(
            f"thrust ({u.f_l:.4f}, {u.f_r:.4f}) N outside [0, {params.f_max}] N"
        )

    model = vehicle_model(params, float(cfg.c))
    thrust = u.as_array()
    x = state.as_vector()

    k1 = _derivative(x, thrust, model)
    k2 = _derivative(x + 0.5 * dt * k1, thrust, model)
    k3 = _derivative(x + 0.5 * dt * k2, thrust, model)
    k4 = _derivative(x + dt * k3, thrust, model)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next)) > BLOWUP_LIMIT:
        raise NumericBlowupError("state left the finite range during integration")
    # the next step starts from this state, so check the singularity now
    euler_rate_matrix(x_next[3:6])
    return BlimpState.from_vector(x_next)


def kinetic_energy(state: BlimpState, cfg: SliderConfig, params: ModelParams) -> float:
    """0.5 * nu^T M(c) nu."""
    model = vehicle_model(params, float(cfg.c))
    nu = state.nu
    return 0.5 * float(nu @ (model.mass_diag * nu))


def equilibrium_pitch(params: ModelParams, c: float) -> float:
    """
    Static pitch trim at rest for a slider setting (neutral buoyancy, no thrust).

    Balances W * r_g x k - B * r_cb x k about the body y axis.
    """
    model = vehicle_model(params, float(c))
    lever = model.weight * model.r_g - model.buoyancy * model.r_cb
    return float(np.arctan2(-lever[0], lever[2]))


def randomize_params(
    params: ModelParams,
    rng_seed: int,
    randomization: Optional[RandomizationConfig] = None,
) -> ModelParams:
    """
    Draw a randomized copy of the parameters.

    Aerodynamic coefficients get independent factors in [1 - a, 1 + a] and
    mass, inertia and added-mass terms in [1 - m, 1 + m], where a and m are
    params.rand_aero_frac and params.rand_mass_frac. Buoyancy shares the
    total-mass factor unless independent_buoyancy is set.

    Args:
        params: Nominal parameters
        rng_seed: Seed of the draw
        randomization: Toggles; when randomization.params is False the input is returned unchanged

    Returns:
        Randomized parameters (deterministic per seed)
    """
    randomization = randomization or RandomizationConfig()
    if not randomization.params:
        return params

    rng = np.random.default_rng(rng_seed)
    a, m = params.rand_aero_frac, params.rand_mass_frac

    def aero_factors(n: int) -> np.ndarray:
        return rng.uniform(1.0 - a, 1.0 + a, size=n)

    def mass_factors(n: int) -> np.ndarray:
        return rng.uniform(1.0 - m, 1.0 + m, size=n)

    aero = params.aero
    aero_scaled = aero.model_copy(update={
        "drag": tuple(np.asarray(aero.drag) * aero_factors(3)),
        "lift_slope": aero.lift_slope * aero_factors(1)[0],
        "rate_damping": tuple(np.asarray(aero.rate_damping) * aero_factors(3)),
        "pitch_stiffness": aero.pitch_stiffness * aero_factors(1)[0],
        "yaw_stiffness": aero.yaw_stiffness * aero_factors(1)[0],
    })

    mass_factor = mass_factors(1)[0]
    buoyancy_draw = mass_factors(1)[0]
    buoyancy_factor = buoyancy_draw if randomization.independent_buoyancy else mass_factor

    return params.model_copy(update={
        "m_body": params.m_body * mass_factor,
        "m_slider": params.m_slider * mass_factor,
        "buoyancy": params.buoyancy * buoyancy_factor,
        "inertia_diag": tuple(np.asarray(params.inertia_diag) * mass_factors(3)),
        "added_mass_diag": tuple(np.asarray(params.added_mass_diag) * mass_factors(6)),
        "aero": aero_scaled,
    })


def randomize_initial_state(
    nominal: BlimpState,
    rng_seed: int,
    randomization: Optional[RandomizationConfig] = None,
) -> BlimpState:
    """
    Add bounded uniform offsets to a nominal state.

    Position offsets are bounded by position_offset (m), attitude by
    attitude_offset_deg, linear velocity by velocity_offset (m/s) and
    body rates by rate_offset (rad/s).
    Zero bounds (or initial_state disabled) return the nominal state.
    """
    randomization = randomization or RandomizationConfig()
    if not randomization.initial_state:
        return nominal

    bounds = np.concatenate([
        np.full(3, randomization.position_offset),
        np.full(3, np.deg2rad(randomization.attitude_offset_deg)),
        np.full(3, randomization.velocity_offset),
        np.full(3, randomization.rate_offset),
    ])
    if not np.any(bounds > 0):
        return nominal

    rng = np.random.default_rng(rng_seed)
    offsets = rng.uniform(-1.0, 1.0, size=12) * bounds
    return BlimpState.from_vector(nominal.as_vector() + offsets)

"""
Pytest configuration and shared fixtures for the test suite.

Provides nominal vehicle parameters, small learner configurations and a
tiny end-to-end training configuration that runs in seconds.
"""

import os

import numpy as np
import pytest

from app.models.config import (
    BiasPair,
    EnvConfig,
    RandomizationConfig,
    SacConfig,
    SpgConfig,
    TrainConfig,
)
from app.models.params import AeroCoefficients, ModelParams
from app.models.state import BlimpState
from app.models.task import Goal


@pytest.fixture
def params() -> ModelParams:
    """Nominal model parameters (neutrally buoyant)."""
    return ModelParams()


@pytest.fixture
def frictionless_params() -> ModelParams:
    """No aerodynamics and CoM on the CoB, so only inertial terms act."""
    return ModelParams(
        aero=AeroCoefficients(
            drag=(0.0, 0.0, 0.0),
            lift_slope=0.0,
            rate_damping=(0.0, 0.0, 0.0),
            pitch_stiffness=0.0,
            yaw_stiffness=0.0,
        ),
        r_cb=(0.0, 0.0, 0.0),
        slider_axis_offset=(0.0, 0.0),
    ).neutral()


@pytest.fixture
def env_config() -> EnvConfig:
    return EnvConfig()


@pytest.fixture
def short_env_config() -> EnvConfig:
    """One-second episodes (10 control steps)."""
    return EnvConfig(horizon=1.0)


@pytest.fixture
def no_randomization() -> RandomizationConfig:
    return RandomizationConfig(params=False, initial_state=False)


@pytest.fixture
def level_goal() -> Goal:
    return Goal(zeta=(4.5, 0.0, 0.0), r_g=0.2)


@pytest.fixture
def moving_state() -> BlimpState:
    """A generic state away from every singularity."""
    return BlimpState(
        p=np.array([0.3, -0.2, 0.1]),
        e=np.array([0.05, 0.1, 0.3]),
        v_b=np.array([0.4, 0.05, -0.02]),
        w_b=np.array([0.02, -0.03, 0.1]),
    )


@pytest.fixture
def small_sac_config() -> SacConfig:
    """Tiny networks and batches for fast unit tests."""
    return SacConfig(
        batch_size=8,
        critic_hidden=16,
        actor_hidden=16,
        hidden_layers=2,
        warmup_steps=10,
        buffer_capacity=1000,
    )


@pytest.fixture
def small_spg_config() -> SpgConfig:
    return SpgConfig(hidden=8, hidden_layers=1, batch_episodes=2)


@pytest.fixture
def tiny_train_config(small_sac_config, small_spg_config) -> TrainConfig:
    """Six one-second episodes split evenly across the two stages."""
    return TrainConfig(
        total_episodes=6,
        stage1_episodes=3,
        seed=7,
        env=EnvConfig(horizon=1.0),
        sac=small_sac_config,
        spg=small_spg_config,
        eval_interval=3,
        checkpoint_interval=3,
        divergence_window=50,
        eval_goals=[(4.5, 0.0, 0.0)],
        bias_pairs=[BiasPair(zeta=(4.5, 0.0, 0.0), c=0.0)],
    )


@pytest.fixture
def clean_train_env(monkeypatch):
    """Remove BLIMP_TRAIN__* variables inherited from the shell."""
    for key in list(os.environ):
        if key.upper().startswith("BLIMP_TRAIN"):
            monkeypatch.delenv(key)
    return monkeypatch

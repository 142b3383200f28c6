"""
Outer-level soft policy gradient over the episode-wise slider position c,
conditioned on the goal zeta.

The policy is a squashed Gaussian in normalized slider units (c / c_max), so
log-probabilities and the entropy target are measured on [-1, 1]. Updates are
plain stochastic gradient ascent with a scheduled step size eta^k.
"""

import math
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from app.core.logging import get_logger
from app.models.config import SLIDER_MAX, SLIDER_MIN, SpgConfig
from app.models.training import OuterSample
from app.services.nn import AdamState, GaussianMlpPolicy, adam_step

logger = get_logger(__name__)

ZETA_SCALE = 5.0
ADVANTAGE_EPS = 1e-8


def episode_return(rewards: Sequence[float], gamma: float) -> float:
    """Discounted sum of raw task rewards (no entropy bonus)."""
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * float(r)
        discount *= gamma
    return total


def step_size(k: int, mode: str = "robbins_monro", eta0: float = 0.3, power: float = 1.0) -> float:
    """
    Outer step size at iteration k.

    constant: eta0; robbins_monro: eta0 / (k + 1); power: eta0 / (k + 1)^p.
    The decaying modes have divergent sums and convergent sums of squares
    for p in (0.5, 1].
    """
    if k < 0:
        raise ValueError(f"iteration index must be non-negative, got {k}")
    if mode == "constant":
        return eta0
    if mode == "robbins_monro":
        return eta0 / (k + 1)
    if mode == "power":
        return eta0 / (k + 1) ** power
    raise ValueError(f"unknown step-size mode '{mode}'")


def bias_diagnostic(
    current: Mapping[Any, float],
    reference: Mapping[Any, float],
    k: int,
) -> float:
    """
    Mean absolute return gap between the current and a frozen reference
    inner policy over a shared set of (goal, slider) pairs. Monitoring only.
    """
    keys = [key for key in current if key in reference]
    if not keys:
        return 0.0
    gap = float(np.mean([abs(current[key] - reference[key]) for key in keys]))
    logger.debug(f"Bias proxy at outer iteration {k}: {gap:.5f} over {len(keys)} pairs")
    return gap


class OuterPolicy:
    """Slider policy pi(c | zeta) with entropy coefficient beta and a return baseline."""

    def __init__(
        self,
        config: Optional[SpgConfig] = None,
        seed: int = 0,
        c_min: float = SLIDER_MIN,
        c_max: float = SLIDER_MAX,
    ):
        self.config = config or SpgConfig()
        self.c_min = c_min
        self.c_max = c_max
        self.rng = np.random.default_rng(seed)
        self.policy = GaussianMlpPolicy.build(
            3, self.config.hidden, self.config.hidden_layers, [-1.0], [1.0], self.rng
        )
        self.log_beta = np.array([math.log(self.config.initial_beta)])
        self.beta_opt = AdamState.for_params([self.log_beta], self.config.beta_lr)
        self.baseline: Optional[float] = None
        self.iteration = 0

    @property
    def beta(self) -> float:
        return float(np.exp(self.log_beta[0]))

    def _inputs(self, zeta) -> np.ndarray:
        return np.asarray(zeta, dtype=float) / ZETA_SCALE

    def _to_c(self, c_norm) -> np.ndarray:
        mid = 0.5 * (self.c_max + self.c_min)
        half = 0.5 * (self.c_max - self.c_min)
        return mid + half * np.asarray(c_norm, dtype=float)

    def _to_norm(self, c) -> np.ndarray:
        mid = 0.5 * (self.c_max + self.c_min)
        half = 0.5 * (self.c_max - self.c_min)
        return (np.asarray(c, dtype=float) - mid) / half

    def select_config(
        self,
        zeta,
        deterministic: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[float, float]:
        """
        Sample c ~ pi(c | zeta), or the squashed mean when deterministic.

        Returns:
            (c in meters, log-probability in normalized units)
        """
        sample, _ = self.policy.sample(self._inputs(zeta), rng or self.rng, deterministic=deterministic)
        c = float(np.clip(self._to_c(sample.action[0]), self.c_min, self.c_max))
        return c, float(sample.log_prob)

    def log_prob(self, zeta, c) -> np.ndarray:
        features = self.policy.net.forward(self._inputs(zeta))
        return self.policy.head.log_prob(features, self._to_norm(c)[..., None])

    def _baseline_for(self, returns: np.ndarray) -> float:
        if returns.size >= 2:
            return float(returns.mean())
        if self.baseline is not None:
            return self.baseline
        return float(returns.mean())

    def advantages(self, returns: np.ndarray) -> np.ndarray:
        """
        Centered returns, divided by their batch std when normalize_advantage
        is set; the result is then invariant to the offset and positive scale
        of the returns.
        """
        advantage = returns - self._baseline_for(returns)
        if self.config.normalize_advantage and returns.size >= 2:
            advantage = advantage / (float(returns.std()) + ADVANTAGE_EPS)
        return advantage

    def objective_and_grads(self, batch: Sequence[OuterSample]) -> tuple[float, list[np.ndarray]]:
        """
        Estimate J = mean[log pi(c|zeta) * A] + beta * mean[-log pi(c|zeta)]
        and its gradient, A being the advantages of the batch returns. The
        entropy term is reparameterized through the noise recovered from each
        stored c; the return term uses the score function with c held fixed.
        """
        if not batch:
            raise ValueError("outer update needs at least one sample")
        zetas = np.stack([self._inputs(s.zeta) for s in batch])
        c_norm = self._to_norm(np.array([s.c for s in batch]))[:, None]
        returns = np.array([s.episode_return for s in batch], dtype=float)
        advantage = self.advantages(returns)
        n = len(batch)
        beta = self.beta

        features, tape = self.policy.net.forward_with_tape(zetas)
        sample = self.policy.head.recover(features, c_norm)
        objective = float(np.mean(sample.log_prob * advantage) + beta * np.mean(-sample.log_prob))

        g_features = self.policy.head.score_backward(sample, advantage / n)
        g_features = g_features + self.policy.head.backward(sample, grad_log_prob=np.full(n, -beta / n))
        grads, _ = self.policy.net.backward(tape, g_features)
        return objective, grads

    def outer_update(self, batch: Sequence[OuterSample], k: Optional[int] = None) -> float:
        """
        One ascent step with step size eta^k; updates the running baseline.

        Returns:
            Objective estimate before the step
        """
        k = self.iteration if k is None else k
        objective, grads = self.objective_and_grads(batch)
        eta = self.step_size(k)
        for p, g in zip(self.policy.net.params, grads):
            p += eta * g

        mean_return = float(np.mean([s.episode_return for s in batch]))
        m = self.config.baseline_momentum
        self.baseline = mean_return if self.baseline is None else m * self.baseline + (1.0 - m) * mean_return
        self.iteration = k + 1
        return objective

    def beta_update(self, batch: Sequence[OuterSample]) -> float:
        """Adam step on log beta minimizing E[-beta * (log pi(c|zeta) + H_target)]."""
        zetas = np.stack([np.asarray(s.zeta, dtype=float) for s in batch])
        log_prob = self.log_prob(zetas, np.array([s.c for s in batch]))
        gap = float(np.mean(log_prob + self.config.target_entropy))
        beta = self.beta
        adam_step([self.log_beta], [np.array([-beta * gap])], self.beta_opt)
        return -beta * gap

    def step_size(self, k: int) -> float:
        cfg = self.config
        return step_size(k, cfg.step_size_mode, cfg.eta0, cfg.power)

    def snapshot(self) -> list[np.ndarray]:
        """Copies of the network parameters."""
        return [p.copy() for p in self.policy.net.params]

    def state_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(),
            "c_min": self.c_min,
            "c_max": self.c_max,
            "policy": self.policy.state_dict(),
            "log_beta": float(self.log_beta[0]),
            "beta_opt": self.beta_opt.state_dict(),
            "baseline": self.baseline,
            "iteration": self.iteration,
        }

    @classmethod
    def from_state(cls, state: dict[str, Any], seed: int = 0) -> "OuterPolicy":
        outer = cls(
            config=SpgConfig.model_validate(state["config"]),
            seed=seed,
            c_min=state["c_min"],
            c_max=state["c_max"],
        )
        outer.policy = GaussianMlpPolicy.from_state(state["policy"])
        outer.log_beta = np.array([state["log_beta"]])
        outer.beta_opt = AdamState.from_state(state["beta_opt"])
        outer.baseline = state["baseline"]
        outer.iteration = state["iteration"]
        return outer

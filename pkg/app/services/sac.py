"""
Inner-level Soft Actor-Critic: twin critics with Polyak targets, a
squashed-Gaussian actor, automatic temperature tuning and a uniform replay
buffer.

The actor samples in normalized action units [-1, 1]; act() maps to physical
units. Critics see scaled observations and normalized actions, and all
log-probabilities (hence the target entropy) are in normalized units.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from app.core.exceptions import ShapeMismatchError
from app.core.logging import get_logger
from app.models.config import SacConfig
from app.models.training import Transition
from app.services.nn import AdamState, GaussianMlpPolicy, Mlp, adam_step

logger = get_logger(__name__)

INITIAL_ROWS = 4096


@dataclass
class Batch:
    """Stacked transitions; a is in physical units."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return self.r.shape[0]

    @classmethod
    def from_transitions(cls, transitions: list[Transition]) -> "Batch":
        return cls(
            s=np.stack([t.s for t in transitions]),
            a=np.stack([t.a for t in transitions]),
            r=np.array([t.r for t in transitions], dtype=float),
            s_next=np.stack([t.s_next for t in transitions]),
            done=np.array([float(t.done) for t in transitions]),
        )


class ReplayBuffer:
    """
    Ring buffer sampled uniformly over the filled region.

    Storage grows by doubling up to capacity, then wraps.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int, seed: int = 0):
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.action_dim = action_dim
        rows = min(self.capacity, INITIAL_ROWS)
        self._s = np.zeros((rows, state_dim))
        self._a = np.zeros((rows, action_dim))
        self._r = np.zeros(rows)
        self._s_next = np.zeros((rows, state_dim))
        self._done = np.zeros(rows)
        self._next = 0
        self._size = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self._size

    def _grow(self) -> None:
        rows = min(self.capacity, 2 * self._r.shape[0])
        extra = rows - self._r.shape[0]
        self._s = np.concatenate([self._s, np.zeros((extra, self.state_dim))])
        self._a = np.concatenate([self._a, np.zeros((extra, self.action_dim))])
        self._r = np.concatenate([self._r, np.zeros(extra)])
        self._s_next = np.concatenate([self._s_next, np.zeros((extra, self.state_dim))])
        self._done = np.concatenate([self._done, np.zeros(extra)])

    def add(self, transition: Transition) -> None:
        s = np.asarray(transition.s, dtype=float)
        a = np.asarray(transition.a, dtype=float)
        if s.shape != (self.state_dim,) or a.shape != (self.action_dim,):
            raise ShapeMismatchError(
                f"transition shapes s{s.shape} a{a.shape} do not match "
                f"({self.state_dim},) and ({self.action_dim},)"
            )
        if self._size == self._r.shape[0] and self._size < self.capacity:
            self._grow()
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = transition.r
        self._s_next[i] = transition.s_next
        self._done[i] = float(transition.done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return self.rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int) -> Batch:
        idx = self.sample_indices(batch_size)
        return Batch(
            s=self._s[idx],
            a=self._a[idx],
            r=self._r[idx],
            s_next=self._s_next[idx],
            done=self._done[idx],
        )

    def transitions(self) -> list[Transition]:
        """Filled slots in storage order."""
        return [
            Transition(
                s=self._s[i].copy(),
                a=self._a[i].copy(),
                r=float(self._r[i]),
                s_next=self._s_next[i].copy(),
                done=bool(self._done[i]),
            )
            for i in range(self._size)
        ]


def polyak_average(target: Mlp, source: Mlp, rho: float) -> None:
    """target <- rho * source + (1 - rho) * target, in place."""
    for t, s in zip(target.params, source.params):
        t *= 1.0 - rho
        t += rho * s


class SacAgent:
    """Twin-critic SAC learner over generic state and action dimensions."""

    def __init__(
        self,
        state_dim: int,
        action_low,
        action_high,
        config: Optional[SacConfig] = None,
        seed: int = 0,
        obs_scale=None,
    ):
        """
        Build networks and optimizers.

        Args:
            state_dim: Observation width
            action_low: Physical lower action bounds
            action_high: Physical upper action bounds
            config: Hyperparameters
            seed: Seed of initialization and sampling
            obs_scale: Per-component divisors applied to observations
        """
        self.config = config or SacConfig()
        self.state_dim = int(state_dim)
        self.action_low = np.atleast_1d(np.asarray(action_low, dtype=float))
        self.action_high = np.atleast_1d(np.asarray(action_high, dtype=float))
        self.action_dim = self.action_low.size
        self._action_mid = 0.5 * (self.action_high + self.action_low)
        self._action_half = 0.5 * (self.action_high - self.action_low)
        self.obs_scale = (
            np.ones(self.state_dim) if obs_scale is None else np.asarray(obs_scale, dtype=float)
        )
        if self.obs_scale.shape != (self.state_dim,):
            raise ShapeMismatchError(f"obs_scale must have shape ({self.state_dim},)")

        self.rng = np.random.default_rng(seed)
        cfg = self.config
        ones = np.ones(self.action_dim)
        self.actor = GaussianMlpPolicy.build(
            self.state_dim, cfg.actor_hidden, cfg.hidden_layers, -ones, ones, self.rng
        )
        critic_sizes = [self.state_dim + self.action_dim] + [cfg.critic_hidden] * cfg.hidden_layers + [1]
        self.critics = [Mlp(critic_sizes, rng=self.rng), Mlp(critic_sizes, rng=self.rng)]
        self.targets = [q.copy() for q in self.critics]
        self.log_alpha = np.array([np.log(cfg.initial_alpha)])
        self.target_entropy = (
            float(cfg.target_entropy) if cfg.target_entropy is not None else -float(self.action_dim)
        )

        self.actor_opt = AdamState.for_params(self.actor.net.params, cfg.actor_lr)
        self.critic_opts = [AdamState.for_params(q.params, cfg.critic_lr) for q in self.critics]
        self.alpha_opt = AdamState.for_params([self.log_alpha], cfg.alpha_lr)
        self.updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def scale_obs(self, s) -> np.ndarray:
        return np.asarray(s, dtype=float) / self.obs_scale

    def normalize_action(self, a) -> np.ndarray:
        return (np.asarray(a, dtype=float) - self._action_mid) / self._action_half

    def denormalize_action(self, a_norm) -> np.ndarray:
        return self._action_mid + self._action_half * np.asarray(a_norm, dtype=float)

    def _critic_input(self, s_scaled: np.ndarray, a_norm: np.ndarray) -> np.ndarray:
        return np.concatenate([s_scaled, a_norm], axis=-1)

    def q_values(self, s, a, target: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Both critic estimates for physical actions a."""
        x = self._critic_input(self.scale_obs(s), self.normalize_action(a))
        nets = self.targets if target else self.critics
        return nets[0].forward(x)[..., 0], nets[1].forward(x)[..., 0]

    def min_q(self, s, a, target: bool = False) -> np.ndarray:
        q1, q2 = self.q_values(s, a, target=target)
        return np.minimum(q1, q2)

    def act(self, s, deterministic: bool = False) -> np.ndarray:
        """Physical action; the squashed mean when deterministic."""
        a_norm = self.actor.act(self.scale_obs(s), self.rng, deterministic=deterministic)
        return self.denormalize_action(a_norm)

    def random_action(self) -> np.ndarray:
        """Uniform action over the physical bounds, used during warmup."""
        return self.rng.uniform(self.action_low, self.action_high)

    def critic_target(self, batch: Batch) -> np.ndarray:
        """y = r + gamma * (1 - done) * [min target Q(s', a') - alpha * log pi(a'|s')]."""
        s_next = self.scale_obs(batch.s_next)
        sample, _ = self.actor.sample(s_next, self.rng)
        x = self._critic_input(s_next, sample.action)
        q_next = np.minimum(self.targets[0].forward(x)[:, 0], self.targets[1].forward(x)[:, 0])
        soft_value = q_next - self.alpha * sample.log_prob
        return batch.r + self.config.gamma * (1.0 - batch.done) * soft_value

    def critic_update(self, batch: Batch, targets: Optional[np.ndarray] = None) -> tuple[float, float]:
        """One Adam step per critic on the mean squared error to detached targets."""
        y = self.critic_target(batch) if targets is None else targets
        x = self._critic_input(self.scale_obs(batch.s), self.normalize_action(batch.a))
        n = len(batch)
        losses = []
        for critic, opt in zip(self.critics, self.critic_opts):
            q, tape = critic.forward_with_tape(x)
            err = q[:, 0] - y
            losses.append(float(np.mean(err ** 2)))
            grads, _ = critic.backward(tape, (2.0 / n) * err[:, None])
            adam_step(critic.params, grads, opt)
        return losses[0], losses[1]

    def actor_loss_and_grads(self, batch: Batch) -> tuple[float, list[np.ndarray], np.ndarray]:
        """
        Reparameterized actor loss E[alpha * log pi(a|s) - min_i Q_i(s, a)].

        Returns:
            (loss, actor parameter gradients, log-probs of the fresh actions)
        """
        s = self.scale_obs(batch.s)
        n = s.shape[0]
        sample, actor_tape = self.actor.sample(s, self.rng)
        x = self._critic_input(s, sample.action)
        q1, tape1 = self.critics[0].forward_with_tape(x)
        q2, tape2 = self.critics[1].forward_with_tape(x)
        q1, q2 = q1[:, 0], q2[:, 0]
        use_first = q1 <= q2
        q_min = np.where(use_first, q1, q2)
        alpha = self.alpha
        loss = float(np.mean(alpha * sample.log_prob - q_min))

        # dLoss/dQmin = -1/n, routed to whichever critic attains the min
        _, gx1 = self.critics[0].backward(tape1, (-1.0 / n) * use_first[:, None].astype(float))
        _, gx2 = self.critics[1].backward(tape2, (-1.0 / n) * (~use_first)[:, None].astype(float))
        grad_action = (gx1 + gx2)[:, self.state_dim:]
        grad_features = self.actor.head.backward(
            sample, grad_action=grad_action, grad_log_prob=np.full(n, alpha / n)
        )
        grads, _ = self.actor.net.backward(actor_tape, grad_features)
        return loss, grads, sample.log_prob

    def actor_update(self, batch: Batch) -> tuple[float, np.ndarray]:
        """One Adam step on the actor only; returns (loss, log-probs) for the temperature step."""
        loss, grads, log_prob = self.actor_loss_and_grads(batch)
        adam_step(self.actor.net.params, grads, self.actor_opt)
        return loss, log_prob

    def temperature_update(self, batch: Batch, log_prob: Optional[np.ndarray] = None) -> float:
        """Adam step on log alpha minimizing E[-alpha * (log pi + H_target)]."""
        if log_prob is None:
            sample, _ = self.actor.sample(self.scale_obs(batch.s), self.rng)
            log_prob = sample.log_prob
        gap = float(np.mean(log_prob + self.target_entropy))
        alpha = self.alpha
        loss = -alpha * gap
        adam_step([self.log_alpha], [np.array([-alpha * gap])], self.alpha_opt)
        return loss

    def polyak_update(self, rho: Optional[float] = None) -> None:
        rho = self.config.polyak if rho is None else rho
        for target, critic in zip(self.targets, self.critics):
            polyak_average(target, critic, rho)

    def update(self, batch: Batch) -> dict[str, float]:
        """Critic, actor, temperature, then target networks."""
        q1_loss, q2_loss = self.critic_update(batch)
        actor_loss, log_prob = self.actor_update(batch)
        alpha_loss = self.temperature_update(batch, log_prob)
        self.polyak_update()
        self.updates += 1
        return {
            "q1_loss": q1_loss,
            "q2_loss": q2_loss,
            "actor_loss": actor_loss,
            "alpha_loss": alpha_loss,
            "alpha": self.alpha,
        }

    def snapshot_actor(self) -> GaussianMlpPolicy:
        """Frozen copy of the current actor."""
        return self.actor.copy()

    def act_with(self, actor: GaussianMlpPolicy, s, deterministic: bool = True) -> np.ndarray:
        """Act with another actor (e.g. a frozen snapshot) using this agent's scaling."""
        return self.denormalize_action(actor.act(self.scale_obs(s), self.rng, deterministic=deterministic))

    def state_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(),
            "state_dim": self.state_dim,
            "action_low": self.action_low.tolist(),
            "action_high": self.action_high.tolist(),
            "obs_scale": self.obs_scale.tolist(),
            "actor": self.actor.state_dict(),
            "critics": [q.state_dict() for q in self.critics],
            "targets": [q.state_dict() for q in self.targets],
            "log_alpha": float(self.log_alpha[0]),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opts": [o.state_dict() for o in self.critic_opts],
            "alpha_opt": self.alpha_opt.state_dict(),
            "updates": self.updates,
        }

    @classmethod
    def from_state(cls, state: dict[str, Any], seed: int = 0) -> "SacAgent":
        agent = cls(
            state_dim=state["state_dim"],
            action_low=state["action_low"],
            action_high=state["action_high"],
            config=SacConfig.model_validate(state["config"]),
            seed=seed,
            obs_scale=state["obs_scale"],
        )
        agent.actor = GaussianMlpPolicy.from_state(state["actor"])
        agent.critics = [Mlp.from_state(q) for q in state["critics"]]
        agent.targets = [Mlp.from_state(q) for q in state["targets"]]
        agent.log_alpha = np.array([state["log_alpha"]])
        agent.actor_opt = AdamState.from_state(state["actor_opt"])
        agent.critic_opts = [AdamState.from_state(o) for o in state["critic_opts"]]
        agent.alpha_opt = AdamState.from_state(state["alpha_opt"])
        agent.updates = state["updates"]
        return agent

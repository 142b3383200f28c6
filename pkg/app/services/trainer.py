"""
Two-stage bi-level training.

Stage 1 (j < N) pretrains the SAC thrust controller with c drawn uniformly
over the slider range. Stage 2 draws c from the outer policy and updates it
every batch_episodes completed episodes, while SAC keeps learning on every
control step of every training episode.
"""

from collections import deque
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.exceptions import TrainingDivergedError
from app.core.logging import get_logger, log_episode, log_evaluation, log_outer_update
from app.models.config import RandomizationConfig, TrainConfig
from app.models.params import ModelParams
from app.models.task import Goal, Termination
from app.models.training import (
    ACTION_DIM,
    STATE_DIM,
    EpisodeMode,
    EpisodeRecord,
    OuterSample,
    Stage,
    StepSample,
    Transition,
)
from app.repositories.metrics_repo import MetricsRepository
from app.services.environment import BlimpEnv, observation_scale
from app.services.sac import ReplayBuffer, SacAgent
from app.services.spg import OuterPolicy, bias_diagnostic, episode_return
from app.services.task import sample_goal

if TYPE_CHECKING:
    from app.repositories.checkpoint_repo import CheckpointRepository

logger = get_logger(__name__)

Controller = Callable[[np.ndarray], np.ndarray]


def stage_boundary_check(j: int, n_stage1: int) -> Stage:
    """Stage 1 iff j < N."""
    return Stage.STAGE1 if j < n_stage1 else Stage.STAGE2


def rollout(
    env: BlimpEnv,
    goal: Goal,
    c: float,
    seed: int,
    controller: Controller,
    gamma: float,
    on_transition: Optional[Callable[[Transition], None]] = None,
    episode: int = -1,
    stage: Optional[Stage] = None,
) -> EpisodeRecord:
    """
    Run one episode with c held fixed.

    Args:
        env: Environment (reset here)
        goal: Target
        c: Slider position for the whole episode
        seed: Randomization seed of the episode
        controller: Observation -> physical thrust command
        gamma: Discount of the recorded return
        on_transition: Called with every transition (learning hook)
        episode: Episode index for the record
        stage: Stage tag for the record

    Returns:
        EpisodeRecord; divergence is a termination cause, never an exception
    """
    obs = env.reset(goal, c, seed)
    steps: list[StepSample] = []
    termination = Termination.RUNNING
    while not termination.is_terminal:
        action = np.asarray(controller(obs), dtype=float)
        outcome = env.step(action)
        termination = outcome.termination
        steps.append(StepSample(
            t=outcome.t,
            state=outcome.state.as_vector().tolist(),
            action=outcome.control.as_array().tolist(),
            reward=outcome.reward.r,
            e_trk=outcome.reward.e_trk,
        ))
        if on_transition is not None:
            on_transition(Transition(
                s=obs,
                a=outcome.control.as_array(),
                r=outcome.reward.r,
                s_next=outcome.observation,
                done=termination.cuts_bootstrap,
            ))
        obs = outcome.observation

    rewards = [s.reward for s in steps]
    return EpisodeRecord(
        episode=episode,
        stage=stage,
        zeta=goal.zeta,
        c=c,
        termination=termination,
        gamma=gamma,
        episode_return=episode_return(rewards, gamma),
        steps=steps,
    )


class InnerLearner:
    """SAC agent plus replay buffer with warmup and one update per control step."""

    def __init__(self, agent: SacAgent, buffer: ReplayBuffer):
        self.agent = agent
        self.buffer = buffer
        self.env_steps = 0
        self.last_losses: dict[str, float] = {}

    @property
    def warming_up(self) -> bool:
        return self.env_steps < self.agent.config.warmup_steps

    def act(self, obs: np.ndarray) -> np.ndarray:
        if self.warming_up:
            return self.agent.random_action()
        return self.agent.act(obs)

    def observe(self, transition: Transition) -> None:
        self.buffer.add(transition)
        self.env_steps += 1
        batch_size = self.agent.config.batch_size
        if not self.warming_up and len(self.buffer) >= batch_size:
            self.last_losses = self.agent.update(self.buffer.sample(batch_size))


def run_episode(
    env: BlimpEnv,
    learner: InnerLearner,
    c: float,
    goal: Goal,
    mode: EpisodeMode,
    seed: int,
    episode: int = -1,
    stage: Optional[Stage] = None,
) -> EpisodeRecord:
    """
    One SAC episode. Training mode explores, stores transitions and updates
    per control step; evaluation mode uses the deterministic actor.
    """
    gamma = learner.agent.config.gamma
    if mode is EpisodeMode.TRAIN:
        return rollout(env, goal, c, seed, learner.act, gamma, learner.observe, episode, stage)
    return rollout(
        env, goal, c, seed, lambda obs: learner.agent.act(obs, deterministic=True), gamma,
        episode=episode, stage=stage,
    )


class EvaluationPoint(BaseModel):
    episode: int
    stage: Stage
    mean_return: float
    goal_rate: float
    bias_proxy: Optional[float] = None


class TrainingSummary(BaseModel):
    """Contents of summary.json."""

    seed: int
    total_episodes: int
    stage1_episodes: int
    episodes_run: int
    outer_updates: int
    sac_updates: int
    aborted: bool = False
    diverged_fraction: float = Field(description="Diverged share of the last divergence window")
    termination_counts: dict[str, int]
    evaluations: list[EvaluationPoint]
    final_alpha: float
    final_beta: float
    checkpoint: Optional[str] = None


class BilevelTrainer:
    """Runs the two-stage schedule and writes metrics and checkpoints."""

    def __init__(
        self,
        config: TrainConfig,
        params: Optional[ModelParams] = None,
        metrics: Optional[MetricsRepository] = None,
        checkpoints: Optional["CheckpointRepository"] = None,
    ):
        self.config = config
        self.params = params or ModelParams()
        self.metrics = metrics
        self.checkpoints = checkpoints

        seeds = np.random.SeedSequence(config.seed).spawn(6)
        agent_seed, outer_seed, buffer_seed = (int(s.generate_state(1)[0]) for s in seeds[:3])
        self.goal_rng = np.random.default_rng(seeds[3])
        self.c_rng = np.random.default_rng(seeds[4])
        self.episode_seeds = np.random.default_rng(seeds[5])

        env_cfg = config.env
        self.env = BlimpEnv(self.params, env_cfg, config.randomization)
        self.eval_env = BlimpEnv(
            self.params, env_cfg, RandomizationConfig(params=False, initial_state=False)
        )
        agent = SacAgent(
            STATE_DIM,
            np.zeros(ACTION_DIM),
            np.full(ACTION_DIM, self.params.f_max),
            config.sac,
            seed=agent_seed,
            obs_scale=observation_scale(env_cfg.slider_max),
        )
        buffer = ReplayBuffer(config.sac.buffer_capacity, STATE_DIM, ACTION_DIM, seed=buffer_seed)
        self.learner = InnerLearner(agent, buffer)
        self.outer = OuterPolicy(config.spg, seed=outer_seed, c_min=env_cfg.slider_min, c_max=env_cfg.slider_max)
        self.reference_actor = None
        self.outer_updates = 0
        self.evaluations: list[EvaluationPoint] = []
        self.recent = deque(maxlen=config.divergence_window)
        self.termination_counts = {t.value: 0 for t in Termination if t.is_terminal}

    @property
    def agent(self) -> SacAgent:
        return self.learner.agent

    def _log(self, kind: str, record) -> None:
        if self.metrics is not None:
            self.metrics.append(kind, record)

    def _episode_record_line(self, record: EpisodeRecord) -> dict:
        return {
            "episode": record.episode,
            "stage": record.stage.value,
            "zeta": list(record.zeta),
            "c": record.c,
            "termination": record.termination.value,
            "gamma": record.gamma,
            "episode_return": record.episode_return,
            "rewards": record.rewards,
            "steps": len(record.steps),
            "alpha": self.agent.alpha,
        }

    def select_slider(self, stage: Stage, goal: Goal) -> tuple[float, Optional[float]]:
        cfg = self.config.env
        if stage is Stage.STAGE1:
            return float(self.c_rng.uniform(cfg.slider_min, cfg.slider_max)), None
        return self.outer.select_config(goal.zeta)

    def eval_slider(self, stage: Stage, zeta) -> float:
        if stage is Stage.STAGE1:
            return 0.0
        c, _ = self.outer.select_config(zeta, deterministic=True)
        return c

    def evaluate(self, episode: int, stage: Stage) -> EvaluationPoint:
        """Deterministic episodes on the fixed eval goals without randomization."""
        records = []
        for zeta in self.config.eval_goals:
            goal = Goal(zeta=zeta, r_g=self.config.env.goal_radius)
            records.append(run_episode(
                self.eval_env, self.learner, self.eval_slider(stage, zeta), goal,
                EpisodeMode.EVAL, seed=0, episode=episode, stage=stage,
            ))
        mean_return = float(np.mean([r.episode_return for r in records]))
        goal_rate = float(np.mean([r.termination is Termination.GOAL_REACHED for r in records]))
        bias = self.bias_proxy() if self.reference_actor is not None else None
        point = EvaluationPoint(
            episode=episode, stage=stage, mean_return=mean_return, goal_rate=goal_rate, bias_proxy=bias,
        )
        log_evaluation(episode, mean_return, goal_rate, bias)
        return point

    def pair_returns(self, actor) -> dict[int, float]:
        gamma = self.agent.config.gamma
        returns = {}
        for i, pair in enumerate(self.config.bias_pairs):
            goal = Goal(zeta=pair.zeta, r_g=self.config.env.goal_radius)
            record = rollout(
                self.eval_env, goal, pair.c, 0,
                lambda obs: self.agent.act_with(actor, obs, deterministic=True), gamma,
            )
            returns[i] = record.episode_return
        return returns

    def bias_proxy(self) -> float:
        """Return gap of the current actor against the actor frozen at the start of stage 2."""
        current = self.pair_returns(self.agent.actor)
        reference = self.pair_returns(self.reference_actor)
        return bias_diagnostic(current, reference, self.outer_updates)

    def _check_divergence(self, episode: int) -> float:
        window = self.config.divergence_window
        fraction = float(np.mean(self.recent)) if self.recent else 0.0
        if len(self.recent) == window and fraction > self.config.divergence_threshold:
            raise TrainingDivergedError(
                f"{fraction:.0%} of the last {window} episodes diverged (episode {episode}); "
                f"check the model parameters and randomization bounds"
            )
        return fraction

    def _checkpoint(self, name: str, episode: int) -> Optional[Path]:
        if self.checkpoints is None:
            return None
        return self.checkpoints.save(
            name, self.agent, self.outer, meta={"episode": episode, "seed": self.config.seed}
        )

    def summary(self, episodes_run: int, aborted: bool, checkpoint: Optional[Path]) -> TrainingSummary:
        return TrainingSummary(
            seed=self.config.seed,
            total_episodes=self.config.total_episodes,
            stage1_episodes=self.config.stage1_episodes,
            episodes_run=episodes_run,
            outer_updates=self.outer_updates,
            sac_updates=self.agent.updates,
            aborted=aborted,
            diverged_fraction=float(np.mean(self.recent)) if self.recent else 0.0,
            termination_counts=self.termination_counts,
            evaluations=self.evaluations,
            final_alpha=self.agent.alpha,
            final_beta=self.outer.beta,
            checkpoint=checkpoint.name if checkpoint else None,
        )

    def train(self, on_episode: Optional[Callable[[EpisodeRecord], None]] = None) -> TrainingSummary:
        """
        Run all M episodes.

        Raises:
            TrainingDivergedError: If more than the threshold share of the
                last divergence_window episodes diverged; a checkpoint and
                summary are written first
        """
        cfg = self.config
        outer_batch: list[OuterSample] = []
        logger.info(
            f"Training start: M={cfg.total_episodes}, N={cfg.stage1_episodes}, seed={cfg.seed}"
        )

        j = -1
        for j in range(cfg.total_episodes):
            stage = stage_boundary_check(j, cfg.stage1_episodes)
            if stage is Stage.STAGE2 and self.reference_actor is None:
                self.reference_actor = self.agent.snapshot_actor()
                logger.info(f"Stage 2 begins at episode {j}")

            goal = sample_goal(self.goal_rng, cfg.env.workspace, cfg.env.goal_radius)
            c, log_prob = self.select_slider(stage, goal)
            seed = int(self.episode_seeds.integers(0, 2 ** 31 - 1))
            record = run_episode(self.env, self.learner, c, goal, EpisodeMode.TRAIN, seed, j, stage)

            self.termination_counts[record.termination.value] += 1
            self.recent.append(record.termination is Termination.DIVERGED)
            self._log("episode", self._episode_record_line(record))
            log_episode(j, stage.value, c, record.episode_return, record.termination.value, len(record.steps))
            if on_episode is not None:
                on_episode(record)

            if stage is Stage.STAGE2:
                outer_batch.append(OuterSample(
                    zeta=goal.position, c=c, log_prob=log_prob, episode_return=record.episode_return,
                ))
                if len(outer_batch) == cfg.spg.batch_episodes:
                    self._outer_step(outer_batch)
                    outer_batch = []

            try:
                self._check_divergence(j)
            except TrainingDivergedError:
                path = self._checkpoint("aborted", j)
                if self.metrics is not None:
                    self.metrics.write_summary(self.summary(j + 1, True, path))
                raise

            if (j + 1) % cfg.eval_interval == 0:
                point = self.evaluate(j, stage)
                self.evaluations.append(point)
                self._log("evaluation", point)
            if (j + 1) % cfg.checkpoint_interval == 0:
                self._checkpoint(f"episode_{j + 1:06d}", j)

        final = self._checkpoint("final", j)
        summary = self.summary(j + 1, False, final)
        if self.metrics is not None:
            self.metrics.write_summary(summary)
        logger.info(
            f"Training finished: {summary.episodes_run} episodes, "
            f"{summary.outer_updates} outer updates, {summary.sac_updates} SAC updates"
        )
        return summary

    def _outer_step(self, batch: list[OuterSample]) -> None:
        k = self.outer.iteration
        eta = self.outer.step_size(k)
        objective = self.outer.outer_update(batch, k)
        beta_loss = self.outer.beta_update(batch)
        self.outer_updates += 1
        log_outer_update(k, eta, objective, self.outer.beta)
        self._log("outer_update", {
            "iteration": k,
            "step_size": eta,
            "objective": objective,
            "beta": self.outer.beta,
            "beta_loss": beta_loss,
            "mean_c": float(np.mean([s.c for s in batch])),
        })


def train(
    config: TrainConfig,
    params: Optional[ModelParams] = None,
    out_dir: Optional[Path] = None,
) -> TrainingSummary:
    """
    Convenience entry: train and write metrics, summary and checkpoints to out_dir.
    """
    metrics = checkpoints = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        metrics = MetricsRepository(out_dir / "metrics.jsonl", out_dir / "summary.json")
        metrics.reset()
        from app.repositories.checkpoint_repo import CheckpointRepository

        checkpoints = CheckpointRepository(out_dir / "checkpoints")
    return BilevelTrainer(config, params, metrics, checkpoints).train()

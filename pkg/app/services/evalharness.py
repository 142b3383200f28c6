"""
Grid evaluation protocol and the statistics built on it.

Every controller flies each grid goal for a number of trials with nominal
model parameters and a small seeded initial-state perturbation. Trials are
scored by the RMS cross-track error up to termination and grouped by target
height.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from app.core.exceptions import EmptyTrajectoryError, UnknownControllerError
from app.core.logging import get_logger
from app.models.config import EnvConfig, PidGains, RandomizationConfig
from app.models.evaluation import (
    CONTROLLER_KINDS,
    GROUP_ORDER,
    ControllerReport,
    EvalReport,
    GoalGrid,
    GroupStats,
    SliderTrend,
    SymmetryPair,
    SymmetryReport,
    TrialResult,
    height_group,
)
from app.models.params import ModelParams
from app.models.task import Goal, Termination
from app.models.training import EpisodeRecord
from app.services.baselines import PidController
from app.services.environment import BlimpEnv
from app.services.sac import SacAgent
from app.services.spg import OuterPolicy
from app.services.trainer import Controller, rollout

logger = get_logger(__name__)

FIXED_SLIDERS = {"sac-fixed:-5": -0.05, "sac-fixed:0": 0.0, "sac-fixed:5": 0.05}


def trajectory_rmse(record: EpisodeRecord) -> float:
    """
    sqrt(mean(e_trk^2)) over the control steps of an episode.

    Raises:
        EmptyTrajectoryError: If the record has no steps
    """
    if not record.steps:
        raise EmptyTrajectoryError(f"episode {record.episode} has no control steps")
    e = np.array([s.e_trk for s in record.steps])
    return float(np.sqrt(np.mean(e ** 2)))


@dataclass
class EvalController:
    """A named controller: how it sets the slider and how it flies."""

    kind: str
    slider: Callable[[tuple[float, float, float]], float]
    factory: Callable[[tuple[float, float, float]], Controller]


def build_controller(
    kind: str,
    agent: Optional[SacAgent] = None,
    outer: Optional[OuterPolicy] = None,
    pid_gains: Optional[PidGains] = None,
    params: Optional[ModelParams] = None,
    env_config: Optional[EnvConfig] = None,
) -> EvalController:
    """
    Resolve a controller kind.

    bilevel: deterministic outer c with the SAC actor; sac-fixed:{-5,0,5}: SAC
    actor with c pinned in centimeters; pid-spg: PID cascade with the outer c
    (0 when no outer policy is available).

    Raises:
        UnknownControllerError: If kind is not a known controller or its inputs are missing
    """
    if kind not in CONTROLLER_KINDS:
        raise UnknownControllerError(f"unknown controller '{kind}'; choose one of {list(CONTROLLER_KINDS)}")

    def outer_slider(zeta) -> float:
        if outer is None:
            return 0.0
        c, _ = outer.select_config(zeta, deterministic=True)
        return c

    if kind == "pid-spg":
        params = params or ModelParams()
        dt = (env_config or EnvConfig()).control_dt
        gains = pid_gains or PidGains()
        return EvalController(kind, outer_slider, lambda zeta: PidController(gains, params, zeta, dt))

    if agent is None:
        raise UnknownControllerError(f"controller '{kind}' needs a trained agent checkpoint")

    def sac_factory(zeta) -> Controller:
        return lambda obs: agent.act(obs, deterministic=True)

    if kind == "bilevel":
        if outer is None:
            raise UnknownControllerError("controller 'bilevel' needs a checkpoint with an outer policy")
        return EvalController(kind, outer_slider, sac_factory)
    c_fixed = FIXED_SLIDERS[kind]
    return EvalController(kind, lambda zeta: c_fixed, sac_factory)


def trial_seed(seed: int, goal_index: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, goal_index, trial]).generate_state(1)[0])


def group_stats(trials: Sequence[TrialResult]) -> dict[str, GroupStats]:
    """Mean and population std of RMSE per height group and overall."""
    buckets: dict[str, list[float]] = {g: [] for g in GROUP_ORDER}
    for t in trials:
        buckets[t.group].append(t.rmse)
        buckets["overall"].append(t.rmse)
    return {
        group: GroupStats(mean=float(np.mean(v)), std=float(np.std(v)), count=len(v))
        for group, v in buckets.items()
        if v
    }


def evaluate(
    controller: EvalController,
    grid: Optional[GoalGrid] = None,
    trials: int = 3,
    seed: int = 0,
    params: Optional[ModelParams] = None,
    env_config: Optional[EnvConfig] = None,
    gamma: float = 0.99,
    on_trial: Optional[Callable[[TrialResult, EpisodeRecord], None]] = None,
) -> EvalReport:
    """
    Run the grid protocol for one controller.

    Args:
        controller: Resolved controller
        grid: Goals (default: the 27-goal grid)
        trials: Repeats per goal
        seed: Base seed of the initial-state perturbations
        params: Nominal model parameters
        env_config: Episode settings
        gamma: Discount used for the recorded returns
        on_trial: Called with each trial and its episode (e.g. trajectory export)

    Returns:
        EvalReport with a single controller section
    """
    grid = grid or GoalGrid()
    env_config = env_config or EnvConfig()
    env = BlimpEnv(params, env_config, RandomizationConfig(params=False, initial_state=True))
    results: list[TrialResult] = []

    for gi, zeta in enumerate(grid.goals):
        goal = Goal(zeta=zeta, r_g=env_config.goal_radius)
        c = controller.slider(zeta)
        if not env_config.workspace.contains(zeta):
            logger.warning(f"Goal {zeta} lies outside the training workspace")
        for trial in range(trials):
            record = rollout(
                env, goal, c, trial_seed(seed, gi, trial), controller.factory(zeta), gamma, episode=trial,
            )
            reached = record.termination is Termination.GOAL_REACHED
            result = TrialResult(
                controller=controller.kind,
                zeta=zeta,
                trial=trial,
                c=c,
                rmse=trajectory_rmse(record),
                termination=record.termination,
                time_to_goal=record.duration if reached else None,
            )
            results.append(result)
            if on_trial is not None:
                on_trial(result, record)

    report = ControllerReport(
        controller=controller.kind,
        trials=results,
        groups=group_stats(results),
        goal_rate=float(np.mean([r.termination is Termination.GOAL_REACHED for r in results])),
    )
    overall = report.groups["overall"]
    logger.info(
        f"Evaluated {controller.kind}: overall RMSE {overall.mean:.3f} +/- {overall.std:.3f} m, "
        f"goal rate {report.goal_rate:.2f}"
    )
    return EvalReport(seed=seed, trials_per_goal=trials, grid=grid, controllers=[report])


def merge_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Combine single-controller reports run with the same protocol."""
    if not reports:
        raise ValueError("nothing to merge")
    first = reports[0]
    for r in reports[1:]:
        if r.seed != first.seed or r.trials_per_goal != first.trials_per_goal or r.grid != first.grid:
            raise ValueError("reports were produced with different protocols")
    return EvalReport(
        seed=first.seed,
        trials_per_goal=first.trials_per_goal,
        grid=first.grid,
        controllers=[c for r in reports for c in r.controllers],
    )


def _slider_by_goal(report: EvalReport, kind: str) -> dict[tuple[float, float, float], float]:
    per_goal: dict[tuple[float, float, float], list[float]] = {}
    for t in report.controller(kind).trials:
        per_goal.setdefault(tuple(t.zeta), []).append(t.c)
    return {zeta: float(np.mean(cs)) for zeta, cs in per_goal.items()}


def slider_trend(report: EvalReport, kind: str = "bilevel") -> SliderTrend:
    """Mean selected c per height group plus the goal -> c map."""
    by_goal = _slider_by_goal(report, kind)
    groups: dict[str, list[float]] = {"climb": [], "level": [], "descent": []}
    for zeta, c in by_goal.items():
        groups[height_group(zeta)].append(c)

    def mean(values: list[float]) -> float:
        return float(np.mean(values)) if values else float("nan")

    return SliderTrend(
        mean_c_climb=mean(groups["climb"]),
        mean_c_level=mean(groups["level"]),
        mean_c_descent=mean(groups["descent"]),
        by_goal=sorted(by_goal.items()),
    )


def symmetry_report(report: EvalReport, kind: str = "bilevel") -> SymmetryReport:
    """|c(zeta) - c(mirror zeta)| for goals mirrored in y; y = 0 goals are excluded."""
    by_goal = _slider_by_goal(report, kind)
    pairs = []
    for zeta, c in sorted(by_goal.items()):
        x, y, z = zeta
        mirror = (x, -y, z)
        if y > 0 and mirror in by_goal:
            pairs.append(SymmetryPair(zeta=zeta, mirror=mirror, asymmetry=abs(c - by_goal[mirror])))
    values = [p.asymmetry for p in pairs]
    return SymmetryReport(
        pairs=pairs,
        mean=float(np.mean(values)) if values else 0.0,
        max=float(np.max(values)) if values else 0.0,
    )


def relative_improvement(report: EvalReport, kind: str, reference: str, group: str = "overall") -> float:
    """Fractional RMSE reduction of kind relative to reference: (ref - kind) / ref."""
    ref = report.controller(reference).groups[group].mean
    own = report.controller(kind).groups[group].mean
    if ref == 0.0:
        return 0.0
    return (ref - own) / ref


def improvement_table(report: EvalReport, kind: str = "bilevel") -> dict[str, float]:
    """Overall relative improvement of kind over every other controller in the report."""
    return {
        other.controller: relative_improvement(report, kind, other.controller)
        for other in report.controllers
        if other.controller != kind
    }

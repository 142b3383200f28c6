"""Tests for the grid evaluation protocol and its statistics."""

import numpy as np
import pytest

from app.core.exceptions import EmptyTrajectoryError, UnknownControllerError
from app.models.evaluation import GRID_X, GRID_Y, GRID_Z, ControllerReport, EvalReport, GoalGrid, TrialResult
from app.models.task import Termination
from app.models.training import EpisodeRecord, StepSample
from app.services.evalharness import (
    build_controller,
    evaluate,
    group_stats,
    improvement_table,
    merge_reports,
    relative_improvement,
    slider_trend,
    symmetry_report,
    trajectory_rmse,
    trial_seed,
)
from app.services.sac import SacAgent
from app.services.spg import OuterPolicy

SMALL_GRID = GoalGrid(goals=[(4.0, 0.0, -1.0), (4.5, 2.0, 0.0)])


def trial(controller: str, zeta, rmse: float, c: float = 0.0, index: int = 0) -> TrialResult:
    return TrialResult(
        controller=controller, zeta=zeta, trial=index, c=c, rmse=rmse, termination=Termination.TIMEOUT,
    )


def report_of(*sections: tuple[str, list[TrialResult]]) -> EvalReport:
    return EvalReport(
        seed=0,
        trials_per_goal=1,
        grid=GoalGrid(goals=sorted({t.zeta for _, ts in sections for t in ts})),
        controllers=[
            ControllerReport(controller=kind, trials=ts, groups=group_stats(ts), goal_rate=0.0)
            for kind, ts in sections
        ],
    )


@pytest.fixture
def agent(small_sac_config) -> SacAgent:
    return SacAgent(16, [0.0, 0.0], [0.1, 0.1], small_sac_config, seed=0)


class TestTrajectoryRmse:
    """Test the per-trial score."""

    def test_rms_of_cross_track(self):
        """Test sqrt(mean(e_trk^2))."""
        steps = [StepSample(t=0.1 * i, state=[0.0] * 12, action=[0.0, 0.0], reward=0.0, e_trk=e)
                 for i, e in enumerate((3.0, 4.0))]
        record = EpisodeRecord(
            zeta=(4.0, 0.0, 0.0), c=0.0, termination=Termination.TIMEOUT, gamma=0.99, episode_return=0.0,
            steps=steps,
        )
        assert trajectory_rmse(record) == pytest.approx(np.sqrt(12.5))

    def test_empty(self):
        """Test an episode without steps raises."""
        record = EpisodeRecord(
            zeta=(4.0, 0.0, 0.0), c=0.0, termination=Termination.DIVERGED, gamma=0.99, episode_return=0.0,
        )
        with pytest.raises(EmptyTrajectoryError):
            trajectory_rmse(record)


class TestBuildController:
    """Test controller resolution."""

    def test_unknown_kind(self):
        """Test unknown names raise."""
        with pytest.raises(UnknownControllerError):
            build_controller("lqr")

    def test_sac_kinds_need_agent(self):
        """Test SAC-based controllers require a checkpoint."""
        with pytest.raises(UnknownControllerError):
            build_controller("sac-fixed:0")

    def test_bilevel_needs_outer(self, agent):
        """Test bilevel requires an outer policy."""
        with pytest.raises(UnknownControllerError):
            build_controller("bilevel", agent=agent)

    def test_fixed_sliders(self, agent):
        """Test the fixed variants pin c at -5, 0 and +5 cm."""
        for kind, c in (("sac-fixed:-5", -0.05), ("sac-fixed:0", 0.0), ("sac-fixed:5", 0.05)):
            assert build_controller(kind, agent=agent).slider((4.0, 0.0, 0.0)) == c

    def test_pid_without_outer_centers_slider(self):
        """Test pid-spg uses c = 0 when no outer policy is given."""
        assert build_controller("pid-spg").slider((4.0, 2.0, 1.0)) == 0.0

    def test_outer_slider_is_deterministic(self, agent, small_spg_config):
        """Test bilevel and pid-spg both use the outer policy's deterministic choice."""
        outer = OuterPolicy(small_spg_config, seed=3)
        expected, _ = outer.select_config((4.0, 2.0, 1.0), deterministic=True)
        assert build_controller("bilevel", agent=agent, outer=outer).slider((4.0, 2.0, 1.0)) == expected
        assert build_controller("pid-spg", outer=outer).slider((4.0, 2.0, 1.0)) == expected


class TestGroupStats:
    """Test height-grouped statistics."""

    def test_population_std_per_group(self):
        """Test groups use the population standard deviation and overall pools everything."""
        trials = [
            trial("pid-spg", (4.0, 0.0, -1.0), 1.0),
            trial("pid-spg", (4.5, 0.0, -1.0), 3.0),
            trial("pid-spg", (4.0, 0.0, 1.0), 2.0),
        ]
        stats = group_stats(trials)
        assert stats["climb"].mean == pytest.approx(2.0)
        assert stats["climb"].std == pytest.approx(1.0)
        assert stats["descent"].count == 1
        assert "level" not in stats
        assert stats["overall"].count == 3
        assert stats["overall"].mean == pytest.approx(2.0)


class TestEvaluate:
    """Test the grid protocol."""

    def test_pid_on_small_grid(self, params, short_env_config):
        """Test one trial per goal and repeat, grouped statistics and reproducibility."""
        seen = []
        controller = build_controller("pid-spg", params=params, env_config=short_env_config)
        report = evaluate(
            controller, SMALL_GRID, trials=2, seed=5, params=params, env_config=short_env_config,
            on_trial=lambda result, record: seen.append((result, record)),
        )
        section = report.controller("pid-spg")
        assert len(section.trials) == 4
        assert len(seen) == 4
        assert set(section.groups) == {"climb", "level", "overall"}
        assert all(t.rmse >= 0.0 for t in section.trials)
        assert 0.0 <= section.goal_rate <= 1.0

        again = evaluate(controller, SMALL_GRID, trials=2, seed=5, params=params, env_config=short_env_config)
        assert [t.rmse for t in again.controller("pid-spg").trials] == [t.rmse for t in section.trials]

    def test_trials_are_perturbed(self, params, short_env_config):
        """Test repeats of a goal start from different seeded perturbations."""
        controller = build_controller("pid-spg", params=params, env_config=short_env_config)
        report = evaluate(controller, SMALL_GRID, trials=2, seed=0, params=params, env_config=short_env_config)
        first, second = report.controller("pid-spg").trials[:2]
        assert first.rmse != second.rmse
        assert trial_seed(0, 0, 0) != trial_seed(0, 0, 1)

    @pytest.mark.slow
    def test_pid_reaches_every_level_goal(self, params):
        """Test PID-SPG with default gains reaches all nine level goals under the perturbed protocol."""
        level = GoalGrid(goals=[(x, y, 0.0) for x in GRID_X for y in GRID_Y])
        controller = build_controller("pid-spg", params=params)
        report = evaluate(controller, level, trials=3, seed=0, params=params)
        section = report.controller("pid-spg")
        missed = [
            (t.zeta, t.trial, t.termination) for t in section.trials if t.termination is not Termination.GOAL_REACHED
        ]
        assert missed == []
        assert section.goal_rate == 1.0


class TestReports:
    """Test merging and derived analyses."""

    def test_merge(self):
        """Test sections concatenate under one protocol."""
        a = report_of(("pid-spg", [trial("pid-spg", (4.0, 0.0, 0.0), 1.0)]))
        b = report_of(("bilevel", [trial("bilevel", (4.0, 0.0, 0.0), 0.5)]))
        merged = merge_reports([a, b])
        assert [c.controller for c in merged.controllers] == ["pid-spg", "bilevel"]

    def test_merge_rejects_mixed_protocols(self):
        """Test reports with different seeds cannot be merged."""
        a = report_of(("pid-spg", [trial("pid-spg", (4.0, 0.0, 0.0), 1.0)]))
        b = a.model_copy(update={"seed": 1})
        with pytest.raises(ValueError):
            merge_reports([a, b])
        with pytest.raises(ValueError):
            merge_reports([])

    def test_improvement(self):
        """Test (ref - own) / ref against every other controller."""
        report = report_of(
            ("bilevel", [trial("bilevel", (4.0, 0.0, 0.0), 0.5)]),
            ("pid-spg", [trial("pid-spg", (4.0, 0.0, 0.0), 1.0)]),
            ("sac-fixed:0", [trial("sac-fixed:0", (4.0, 0.0, 0.0), 0.8)]),
        )
        assert relative_improvement(report, "bilevel", "pid-spg") == pytest.approx(0.5)
        assert improvement_table(report) == pytest.approx({"pid-spg": 0.5, "sac-fixed:0": 0.375})

    def test_slider_trend_and_symmetry(self):
        """Test per-group slider means and mirrored-goal asymmetry."""
        trials = [
            trial("bilevel", (4.0, 2.0, -1.0), 0.1, c=-0.04),
            trial("bilevel", (4.0, -2.0, -1.0), 0.1, c=-0.03),
            trial("bilevel", (4.0, 0.0, 0.0), 0.1, c=0.0),
            trial("bilevel", (4.0, 0.0, 1.0), 0.1, c=0.03),
        ]
        report = report_of(("bilevel", trials))
        trend = slider_trend(report)
        assert trend.mean_c_climb == pytest.approx(-0.035)
        assert trend.mean_c_level == pytest.approx(0.0)
        assert trend.mean_c_descent == pytest.approx(0.03)
        symmetry = symmetry_report(report)
        assert len(symmetry.pairs) == 1
        assert symmetry.pairs[0].zeta == (4.0, 2.0, -1.0)
        assert symmetry.max == pytest.approx(0.01)


    def test_known_trend_over_full_grid(self):
        """Test a slider that grows with z and leans with y is recovered group by group and pair by pair."""
        trials = [
            trial("bilevel", (x, y, z), 0.1, c=0.03 * z + 0.001 * y + 0.002 * k, index=k)
            for x in GRID_X
            for y in GRID_Y
            for z in GRID_Z
            for k in range(2)
        ]
        report = report_of(("bilevel", trials))

        trend = slider_trend(report)
        assert trend.mean_c_climb == pytest.approx(-0.029)
        assert trend.mean_c_level == pytest.approx(0.001)
        assert trend.mean_c_descent == pytest.approx(0.031)
        assert trend.mean_c_climb < trend.mean_c_level < trend.mean_c_descent
        assert len(trend.by_goal) == 27
        assert dict(trend.by_goal)[(4.5, 2.0, -1.0)] == pytest.approx(-0.027)

        symmetry = symmetry_report(report)
        assert len(symmetry.pairs) == 9
        assert all(p.zeta[1] == 2.0 and p.mirror[1] == -2.0 for p in symmetry.pairs)
        assert symmetry.mean == pytest.approx(0.004)
        assert symmetry.max == pytest.approx(0.004)

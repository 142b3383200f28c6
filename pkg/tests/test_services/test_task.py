"""Tests for reference geometry, shaped reward and termination."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from app.core.exceptions import DegenerateGoalError
from app.models.config import RewardWeights, Workspace
from app.models.state import BlimpState
from app.models.task import Termination
from app.services.task import (
    check_termination,
    cross_track_error,
    forward_progress,
    heading_error,
    sample_goal,
    step_reward,
)

ZETA = (4.0, 0.0, 0.0)
coord = st.floats(min_value=-6.0, max_value=6.0, allow_nan=False)


class TestCrossTrackError:
    """Test distance to the start-goal segment."""

    def test_on_segment_is_zero(self):
        """Test points on the segment have zero error."""
        assert cross_track_error((2.0, 0.0, 0.0), ZETA) == 0.0

    def test_perpendicular_offset(self):
        """Test a lateral offset is measured perpendicular to the segment."""
        assert cross_track_error((2.0, 0.5, 0.0), ZETA) == pytest.approx(0.5)

    def test_behind_start_clamps_to_origin(self):
        """Test points behind the start measure to the origin."""
        assert cross_track_error((-3.0, 4.0, 0.0), ZETA) == pytest.approx(5.0)

    def test_beyond_goal_clamps_to_goal(self):
        """Test points past the goal measure to the goal."""
        assert cross_track_error((7.0, 0.0, 4.0), ZETA) == pytest.approx(5.0)

    def test_degenerate_goal(self):
        """Test a goal at the origin raises."""
        with pytest.raises(DegenerateGoalError):
            cross_track_error((1.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def test_matches_dense_search(self):
        """Test the closed form against a dense search over the segment parameter."""
        rng = np.random.default_rng(11)
        lam = np.linspace(0.0, 1.0, 10001)
        for _ in range(1000):
            p = rng.uniform(-6.0, 6.0, size=3)
            zeta = rng.uniform([4.0, -2.0, -1.0], [5.0, 2.0, 1.0])
            dense = np.min(np.linalg.norm(p[None, :] - lam[:, None] * zeta[None, :], axis=1))
            exact = cross_track_error(p, zeta)
            assert exact <= dense + 1e-12
            assert dense - exact <= np.linalg.norm(zeta) * 0.5e-4 + 1e-12

    @given(st.tuples(coord, coord, coord), st.tuples(coord, coord, coord))
    def test_bounded_by_endpoint_distances(self, p, zeta):
        """Test the error never exceeds the distance to either endpoint."""
        if np.linalg.norm(zeta) < 1e-3:
            return
        e = cross_track_error(p, zeta)
        assert e >= 0.0
        assert e <= np.linalg.norm(np.subtract(p, zeta)) + 1e-9
        assert e <= np.linalg.norm(p) + 1e-9

    @given(
        st.tuples(coord, coord, coord),
        st.tuples(coord, coord, coord),
        st.tuples(*[st.floats(min_value=-np.pi, max_value=np.pi) for _ in range(3)]),
        st.tuples(*[st.sampled_from([-1.0, 1.0]) for _ in range(3)]),
    )
    def test_invariant_under_rotation_and_reflection(self, p, zeta, angles, signs):
        """Test e(Qp, Q zeta) = e(p, zeta) for any orthogonal Q about the reference origin."""
        if np.linalg.norm(zeta) < 1e-3:
            return
        q = Rotation.from_euler("xyz", angles).as_matrix() @ np.diag(signs)
        assert cross_track_error(q @ np.asarray(p), q @ np.asarray(zeta)) == pytest.approx(
            cross_track_error(p, zeta), abs=1e-9
        )


class TestHeadingAndProgress:
    """Test heading error and forward progress."""

    def test_heading_aligned(self):
        """Test flying at the goal gives zero heading error."""
        assert heading_error((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), ZETA) == pytest.approx(0.0)

    def test_heading_opposite(self):
        """Test flying away gives pi."""
        assert heading_error((-1.0, 0.0, 0.0), (0.0, 0.0, 0.0), ZETA) == pytest.approx(np.pi)

    def test_heading_stationary(self):
        """Test a stationary vehicle has zero heading error."""
        assert heading_error((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), ZETA) == 0.0

    def test_heading_at_goal(self):
        """Test the heading error is zero on the goal."""
        assert heading_error((1.0, 0.0, 0.0), ZETA, ZETA) == 0.0

    def test_progress_sign(self):
        """Test approaching the goal is positive progress."""
        assert forward_progress((0.0, 0.0, 0.0), (0.5, 0.0, 0.0), ZETA) == pytest.approx(0.5)
        assert forward_progress((0.5, 0.0, 0.0), (0.0, 0.0, 0.0), ZETA) == pytest.approx(-0.5)


class TestStepReward:
    """Test the shaped reward."""

    def test_components_and_weights(self):
        """Test r = -2 e_trk - e_head + 2 delta_d away from the goal."""
        r = step_reward((0.0, 0.0, 0.0), (1.0, 0.5, 0.0), (1.0, 0.0, 0.0), ZETA, 0.2)
        expected = -2.0 * r.e_trk - 1.0 * r.e_head + 2.0 * r.delta_d
        assert r.e_trk == pytest.approx(0.5)
        assert r.bonus == 0.0
        assert r.r == pytest.approx(expected)

    def test_goal_bonus(self):
        """Test entering the goal ball adds the bonus."""
        r = step_reward((3.7, 0.0, 0.0), (3.9, 0.0, 0.0), (1.0, 0.0, 0.0), ZETA, 0.2)
        assert r.bonus == 20.0
        assert r.r == pytest.approx(20.0 + 2.0 * 0.2)

    def test_custom_weights(self):
        """Test weights are configurable."""
        weights = RewardWeights(tracking=0.0, heading=0.0, progress=1.0, goal_bonus=0.0)
        r = step_reward((0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (1.0, 0.0, 0.0), ZETA, 0.2, weights)
        assert r.r == pytest.approx(r.delta_d)

    @given(
        st.floats(min_value=0.5, max_value=3.0),
        st.floats(min_value=0.0, max_value=np.pi / 2),
        st.floats(min_value=0.0, max_value=np.pi / 2),
    )
    def test_decreasing_in_tracking_error(self, rho, a1, a2):
        """Test at equal goal distance and zero speed, more cross-track error means less reward."""
        zeta = np.array(ZETA)
        start = (0.0, 0.0, 0.0)
        r1 = step_reward(start, zeta + rho * np.array([-np.cos(a1), np.sin(a1), 0.0]), (0.0, 0.0, 0.0), ZETA, 0.2)
        r2 = step_reward(start, zeta + rho * np.array([-np.cos(a2), np.sin(a2), 0.0]), (0.0, 0.0, 0.0), ZETA, 0.2)
        assert r1.delta_d == pytest.approx(r2.delta_d, abs=1e-9)
        assert r1.r - r2.r == pytest.approx(-2.0 * (r1.e_trk - r2.e_trk), abs=1e-9)
        if r1.e_trk < r2.e_trk - 1e-9:
            assert r1.r > r2.r

    @given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=-3.0, max_value=3.0))
    def test_increasing_in_progress(self, x1, x2):
        """Test from a fixed position, a start farther from the goal (more progress) means more reward."""
        p = (1.0, 0.3, -0.2)
        r1 = step_reward((x1, -1.0, 0.5), p, (0.0, 0.0, 0.0), ZETA, 0.2)
        r2 = step_reward((x2, -1.0, 0.5), p, (0.0, 0.0, 0.0), ZETA, 0.2)
        assert r1.e_trk == r2.e_trk
        assert r1.r - r2.r == pytest.approx(2.0 * (r1.delta_d - r2.delta_d), abs=1e-9)
        if r1.delta_d > r2.delta_d + 1e-9:
            assert r1.r > r2.r


class TestTermination:
    """Test termination precedence."""

    def test_running(self):
        """Test an in-flight vehicle keeps running."""
        assert check_termination((1.0, 0.0, 0.0), ZETA, 0.2, 1.0) is Termination.RUNNING

    def test_goal_reached_inside_ball(self):
        """Test a point inside the goal ball ends the episode."""
        assert check_termination((3.85, 0.0, 0.0), ZETA, 0.2, 1.0) is Termination.GOAL_REACHED

    def test_timeout(self):
        """Test t >= horizon times out."""
        assert check_termination((1.0, 0.0, 0.0), ZETA, 0.2, 15.0) is Termination.TIMEOUT
        assert check_termination((1.0, 0.0, 0.0), ZETA, 0.2, 150 * 0.1) is Termination.TIMEOUT

    def test_goal_beats_timeout(self):
        """Test reaching the goal on the last step counts as success."""
        assert check_termination(ZETA, ZETA, 0.2, 15.0) is Termination.GOAL_REACHED

    def test_divergence_beats_goal(self):
        """Test a non-finite state diverges even inside the goal ball."""
        state = BlimpState(p=np.array(ZETA), v_b=np.array([np.nan, 0.0, 0.0]))
        assert check_termination(ZETA, ZETA, 0.2, 1.0, state) is Termination.DIVERGED

    def test_gimbal_diverges(self):
        """Test pitch at the singularity margin diverges."""
        state = BlimpState(e=np.array([0.0, np.pi / 2, 0.0]))
        assert check_termination((1.0, 0.0, 0.0), ZETA, 0.2, 1.0, state) is Termination.DIVERGED

    def test_leaving_box_diverges(self):
        """Test leaving the 10 m flight box diverges."""
        assert check_termination((0.0, 10.5, 0.0), ZETA, 0.2, 1.0) is Termination.DIVERGED
        small = Workspace(bounding_box=2.0)
        assert check_termination((2.5, 0.0, 0.0), ZETA, 0.2, 1.0, workspace=small) is Termination.DIVERGED


class TestSampleGoal:
    """Test goal sampling."""

    def test_inside_workspace(self):
        """Test sampled goals lie in the workspace box."""
        ws = Workspace()
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            assert ws.contains(sample_goal(rng, ws).zeta)

    def test_deterministic_per_seed(self):
        """Test an integer seed fixes the goal."""
        assert sample_goal(5) == sample_goal(5)
        assert sample_goal(5).r_g == 0.2

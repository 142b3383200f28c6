"""Tests for the numpy network stack and the squashed-Gaussian head."""

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from app.core.exceptions import NoTapeError, ShapeMismatchError
from app.services.nn import (
    AdamState,
    GaussianHead,
    GaussianMlpPolicy,
    Mlp,
    adam_step,
    log1m_tanh_sq,
)


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function, perturbing x in place."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        grad[i] = (up - down) / (2 * h)
    return grad


@pytest.fixture
def net() -> Mlp:
    return Mlp([3, 5, 4, 2], rng=np.random.default_rng(1))


@pytest.fixture
def head() -> GaussianHead:
    return GaussianHead([-1.0, 0.0], [1.0, 0.1])


class TestMlp:
    """Test the dense network and its reverse-mode gradients."""

    def test_shapes(self, net):
        """Test single inputs stay unbatched and batches keep their leading axis."""
        assert net.forward(np.zeros(3)).shape == (2,)
        assert net.forward(np.zeros((7, 3))).shape == (7, 2)

    def test_wrong_width(self, net):
        """Test an input of the wrong width raises."""
        with pytest.raises(ShapeMismatchError):
            net.forward(np.zeros(4))

    def test_invalid_sizes(self):
        """Test a network needs at least an input and an output layer."""
        with pytest.raises(ShapeMismatchError):
            Mlp([3])

    def test_parameter_gradients_match_finite_differences(self, net):
        """Test backward against central differences for every weight and bias."""
        x = np.random.default_rng(2).normal(size=(4, 3))
        g_out = np.random.default_rng(3).normal(size=(4, 2))
        _, tape = net.forward_with_tape(x)
        grads, _ = net.backward(tape, g_out)
        for p, g in zip(net.params, grads):
            expected = numeric_grad(lambda: float(np.sum(net.forward(x) * g_out)), p)
            np.testing.assert_allclose(g, expected, rtol=1e-5, atol=1e-7)

    def test_input_gradient(self, net):
        """Test dLoss/dInput against central differences."""
        x = np.array([0.3, -0.2, 0.5])
        g_out = np.array([1.0, -2.0])
        _, tape = net.forward_with_tape(x)
        _, grad_x = net.backward(tape, g_out)
        expected = numeric_grad(lambda: float(net.forward(x) @ g_out), x)
        np.testing.assert_allclose(grad_x, expected, rtol=1e-5, atol=1e-7)

    def test_backward_needs_own_tape(self, net):
        """Test backward without a tape, or with another network's tape, raises."""
        other = net.copy()
        _, tape = other.forward_with_tape(np.zeros(3))
        with pytest.raises(NoTapeError):
            net.backward(None, np.zeros(2))
        with pytest.raises(NoTapeError):
            net.backward(tape, np.zeros(2))

    def test_gradient_shape_checked(self, net):
        """Test a gradient of the wrong shape raises."""
        _, tape = net.forward_with_tape(np.zeros((2, 3)))
        with pytest.raises(ShapeMismatchError):
            net.backward(tape, np.zeros((3, 2)))

    def test_copy_is_independent(self, net):
        """Test mutating a copy leaves the original intact."""
        clone = net.copy()
        clone.weights[0] += 1.0
        assert not np.allclose(clone.weights[0], net.weights[0])

    def test_state_dict_round_trip_is_exact(self, net):
        """Test serialized parameters restore bit for bit."""
        restored = Mlp.from_state(net.state_dict())
        for a, b in zip(restored.params, net.params):
            np.testing.assert_array_equal(a, b)

    def test_output_scale(self):
        """Test output_scale shrinks the last layer's initial weights."""
        small = Mlp([4, 8, 2], rng=np.random.default_rng(0), output_scale=0.1)
        assert np.max(np.abs(small.weights[-1])) <= 0.1 / np.sqrt(8)


class TestAdam:
    """Test the Adam optimizer."""

    def test_first_step_magnitude(self):
        """Test the bias-corrected first step moves each parameter by about lr."""
        p = [np.array([1.0, -2.0])]
        st = AdamState.for_params(p, lr=0.01)
        adam_step(p, [np.array([3.0, -0.5])], st)
        np.testing.assert_allclose(p[0], [0.99, -1.99], atol=1e-6)
        assert st.t == 1

    def test_minimizes_quadratic(self):
        """Test repeated steps converge on a quadratic bowl."""
        p = [np.array([2.0, -3.0])]
        st = AdamState.for_params(p, lr=0.05)
        for _ in range(2000):
            adam_step(p, [2.0 * p[0]], st)
        np.testing.assert_allclose(p[0], [0.0, 0.0], atol=1e-2)

    def test_shape_mismatch(self):
        """Test gradients must match parameter shapes."""
        p = [np.zeros(2)]
        st = AdamState.for_params(p, lr=0.01)
        with pytest.raises(ShapeMismatchError):
            adam_step(p, [np.zeros(3)], st)

    def test_state_round_trip(self):
        """Test optimizer moments survive serialization."""
        p = [np.array([1.0])]
        st = AdamState.for_params(p, lr=0.01)
        adam_step(p, [np.array([0.5])], st)
        restored = AdamState.from_state(st.state_dict())
        assert restored.t == 1
        np.testing.assert_array_equal(restored.m[0], st.m[0])
        np.testing.assert_array_equal(restored.v[0], st.v[0])


class TestSquashedGaussian:
    """Test the tanh-squashed Gaussian head."""

    def test_log1m_tanh_sq_stable(self):
        """Test the stable form matches the direct one and stays finite for large |u|."""
        u = np.linspace(-5.0, 5.0, 21)
        np.testing.assert_allclose(log1m_tanh_sq(u), np.log(1.0 - np.tanh(u) ** 2), rtol=1e-9, atol=1e-12)
        big = log1m_tanh_sq(np.array([50.0, -50.0]))
        assert np.all(np.isfinite(big))
        np.testing.assert_allclose(big, -2.0 * (50.0 - np.log(2.0)), rtol=1e-12)

    def test_actions_within_bounds(self, head):
        """Test samples never leave [low, high]."""
        features = np.array([[3.0, -3.0, 1.0, 1.0]] * 500)
        sample = head.sample_squashed(features, np.random.default_rng(0))
        assert np.all(sample.action >= head.low) and np.all(sample.action <= head.high)

    def test_deterministic_is_squashed_mean(self, head):
        """Test deterministic mode returns the squashed mean."""
        features = np.array([0.4, -0.7, -1.0, -2.0])
        sample = head.sample_squashed(features, None, deterministic=True)
        np.testing.assert_allclose(sample.action, head.squash(np.array([0.4, -0.7])))

    def test_log_prob_matches_recomputation(self, head):
        """Test the sampled log-density equals log_prob of the same action."""
        features = np.array([[0.2, 0.1, -0.5, -1.0]] * 10)
        sample = head.sample_squashed(features, np.random.default_rng(4))
        np.testing.assert_allclose(head.log_prob(features, sample.action), sample.log_prob, rtol=1e-8)

    def test_density_integrates_to_one(self):
        """Test the squashed density over a physical interval has unit mass."""
        one_d = GaussianHead([0.0], [0.1])
        features = np.array([0.3, np.log(0.7)])

        def density(a):
            return float(np.exp(one_d.log_prob(features, np.array([a]))))

        mass, _ = quad(density, 0.0, 0.1, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_pre_squash_samples_are_gaussian(self):
        """Test unsquashed samples pass a chi-square test against N(mu, sigma^2)."""
        one_d = GaussianHead([-1.0], [1.0])
        mu, sigma = 0.3, 0.5
        features = np.tile([mu, np.log(sigma)], (20000, 1))
        sample = one_d.sample_squashed(features, np.random.default_rng(11))
        z = (sample.u[:, 0] - mu) / sigma
        edges = stats.norm.ppf(np.linspace(0.0, 1.0, 11))
        observed, _ = np.histogram(z, bins=edges)
        result = stats.chisquare(observed, np.full(10, len(z) / 10))
        assert result.pvalue > 1e-3

    def test_reparameterized_gradient(self, head):
        """Test backward with eps fixed against central differences."""
        features = np.array([[0.3, -0.4, -0.6, -1.2], [-0.1, 0.8, -2.0, 0.1]])
        sample = head.sample_squashed(features, np.random.default_rng(5))
        w_a = np.array([[0.7, -1.3], [2.0, 0.4]])
        w_lp = np.array([0.5, -1.5])

        def loss():
            mu, log_std, _ = head.split(features)
            u = mu + np.exp(log_std) * sample.eps
            action = head.squash(u)
            log_prob = head._log_prob_u(u, sample.eps, log_std)
            return float(np.sum(w_a * action) + np.sum(w_lp * log_prob))

        analytic = head.backward(sample, grad_action=w_a, grad_log_prob=w_lp)
        np.testing.assert_allclose(analytic, numeric_grad(loss, features), rtol=1e-5, atol=1e-7)

    def test_score_gradient(self, head):
        """Test score_backward with the action fixed against central differences."""
        features = np.array([[0.3, -0.4, -0.6, -1.2]])
        sample = head.sample_squashed(features, np.random.default_rng(6))
        action = sample.action.copy()
        analytic = head.score_backward(sample, np.array([1.0]))
        expected = numeric_grad(lambda: float(head.log_prob(features, action).sum()), features)
        np.testing.assert_allclose(analytic, expected, rtol=1e-4, atol=1e-6)

    def test_clamped_log_std_has_no_gradient(self, head):
        """Test log_std outside [-20, 2] receives zero gradient."""
        features = np.array([0.0, 0.0, 5.0, -25.0])
        sample = head.sample_squashed(features, np.random.default_rng(7))
        grad = head.backward(sample, grad_log_prob=np.array(1.0))
        np.testing.assert_array_equal(grad[2:], [0.0, 0.0])
        grad = head.score_backward(sample, np.array(1.0))
        np.testing.assert_array_equal(grad[2:], [0.0, 0.0])

    def test_bad_bounds(self):
        """Test high must exceed low."""
        with pytest.raises(ShapeMismatchError):
            GaussianHead([0.0], [0.0])


class TestGaussianMlpPolicy:
    """Test the policy wrapper."""

    def test_round_trip(self):
        """Test a restored policy acts identically in deterministic mode."""
        policy = GaussianMlpPolicy.build(4, 8, 2, [-1.0, -1.0], [1.0, 1.0], np.random.default_rng(0))
        restored = GaussianMlpPolicy.from_state(policy.state_dict())
        x = np.array([0.1, 0.2, -0.3, 0.4])
        np.testing.assert_array_equal(
            restored.act(x, None, deterministic=True), policy.act(x, None, deterministic=True)
        )


class TestWideNetworkGradients:
    """Test gradients of critic- and actor-sized trunks."""

    @pytest.mark.slow
    @pytest.mark.parametrize("sizes", [[16, 512, 512, 1], [16, 128, 128, 4]])
    def test_random_parameters_match_finite_differences(self, sizes):
        """Test 1000 randomly drawn parameters against central differences."""
        rng = np.random.default_rng(13)
        net = Mlp(sizes, rng=rng)
        x = rng.normal(size=sizes[0])
        g_out = rng.normal(size=sizes[-1])
        _, tape = net.forward_with_tape(x)
        grads, _ = net.backward(tape, g_out)

        params = net.params
        counts = np.array([p.size for p in params], dtype=float)
        for _ in range(1000):
            k = int(rng.choice(len(params), p=counts / counts.sum()))
            flat = params[k].reshape(-1)
            i = int(rng.integers(flat.size))
            old = flat[i]
            flat[i] = old + 1e-6
            up = float(net.forward(x) @ g_out)
            flat[i] = old - 1e-6
            down = float(net.forward(x) @ g_out)
            flat[i] = old
            numeric = (up - down) / 2e-6
            analytic = grads[k].reshape(-1)[i]
            assert abs(analytic - numeric) <= 1e-4 * max(abs(analytic), abs(numeric)) + 1e-8

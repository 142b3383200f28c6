"""
Minimal numpy network stack: dense ReLU MLPs with explicit reverse-mode
gradients, Adam, and the tanh-squashed Gaussian head shared by the thrust
actor and the slider policy.

Forward passes return a Tape holding the activations of that call only;
backward consumes a tape, so concurrent inference never shares state.
"""

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from app.core.exceptions import NoTapeError, ShapeMismatchError
from app.core.logging import get_logger

logger = get_logger(__name__)

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
LOG2 = np.log(2.0)
ATANH_EDGE = 1.0 - 1e-12


@dataclass
class Tape:
    """Activations recorded by one forward pass."""

    net_id: int
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    squeeze: bool


class Mlp:
    """
    Fully connected network, ReLU hidden layers and a linear output.

    Weights are stored (out, in); inputs are (batch, in) or a single (in,) vector.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        rng: Optional[np.random.Generator] = None,
        output_scale: float = 1.0,
    ):
        """
        Initialize with uniform fan-in scaling.

        Args:
            sizes: Layer widths [in_dim, hidden..., out_dim]
            rng: Generator for the initial weights
            output_scale: Multiplier on the last layer's initial weights
        """
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ShapeMismatchError(f"invalid layer sizes {list(sizes)}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = [int(s) for s in sizes]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == len(self.sizes) - 2:
                bound *= output_scale
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def params(self) -> list[np.ndarray]:
        """Parameter arrays in [W0, b0, W1, b1, ...] order (live references)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def _as_batch(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"expected input (*, {self.in_dim}), got {x.shape}")
        return x, squeeze

    def forward(self, x) -> np.ndarray:
        """Inference-only forward pass."""
        out, _ = self.forward_with_tape(x)
        return out

    def forward_with_tape(self, x) -> tuple[np.ndarray, Tape]:
        """
        Forward pass that records what backward needs.

        Raises:
            ShapeMismatchError: If the input width differs from in_dim
        """
        h, squeeze = self._as_batch(x)
        inputs, pre = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w.T + b
            pre.append(z)
            h = z if i == last else np.maximum(z, 0.0)
        out = h[0] if squeeze else h
        return out, Tape(net_id=id(self), inputs=inputs, pre_activations=pre, squeeze=squeeze)

    def backward(self, tape: Optional[Tape], grad_out) -> tuple[list[np.ndarray], np.ndarray]:
        """
        Reverse-mode gradients of a recorded forward pass.

        Args:
            tape: Tape returned by forward_with_tape on this network
            grad_out: dLoss/dOutput, same shape as the recorded output

        Returns:
            (parameter gradients in params order, dLoss/dInput)

        Raises:
            NoTapeError: If no tape from this network is given
            ShapeMismatchError: If grad_out does not match the output
        """
        if tape is None or tape.net_id != id(self):
            raise NoTapeError("backward called without a forward tape from this network")
        g = np.asarray(grad_out, dtype=float)
        if tape.squeeze:
            g = g[None, :]
        if g.shape != tape.pre_activations[-1].shape:
            raise ShapeMismatchError(
                f"gradient shape {g.shape} does not match output {tape.pre_activations[-1].shape}"
            )

        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            if i != len(self.weights) - 1:
                g = g * (tape.pre_activations[i] > 0.0)
            grads[2 * i] = g.T @ tape.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i]
        grad_x = g[0] if tape.squeeze else g
        return grads, grad_x

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def load_params(self, params: Sequence[np.ndarray]) -> None:
        """Copy values from another parameter list of identical shapes."""
        own = self.params
        if len(params) != len(own):
            raise ShapeMismatchError(f"expected {len(own)} arrays, got {len(params)}")
        for dst, src in zip(own, params):
            if dst.shape != np.shape(src):
                raise ShapeMismatchError(f"shape {np.shape(src)} does not match {dst.shape}")
            dst[...] = src

    def state_dict(self) -> dict[str, Any]:
        return {"sizes": list(self.sizes), "tensors": [tensor_to_dict(p) for p in self.params]}

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "Mlp":
        net = cls(state["sizes"])
        net.load_params([tensor_from_dict(t) for t in state["tensors"]])
        return net


def tensor_to_dict(arr: np.ndarray) -> dict[str, Any]:
    """Nested-list encoding; Python floats round-trip binary64 exactly through JSON."""
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.tolist()}


def tensor_from_dict(d: dict[str, Any]) -> np.ndarray:
    arr = np.asarray(d["data"], dtype=float)
    shape = tuple(d["shape"])
    if arr.shape != shape:
        raise ShapeMismatchError(f"tensor data shape {arr.shape} does not match declared {shape}")
    return arr


@dataclass
class AdamState:
    """Adam moments for one parameter list."""

    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p, dtype=float) for p in params],
            v=[np.zeros_like(p, dtype=float) for p in params],
        )

    def state_dict(self) -> dict[str, Any]:
        return {
            "lr": self.lr,
            "t": self.t,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "m": [tensor_to_dict(a) for a in self.m],
            "v": [tensor_to_dict(a) for a in self.v],
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "AdamState":
        return cls(
            lr=state["lr"],
            t=state["t"],
            beta1=state["beta1"],
            beta2=state["beta2"],
            eps=state["eps"],
            m=[tensor_from_dict(a) for a in state["m"]],
            v=[tensor_from_dict(a) for a in state["v"]],
        )


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], st: AdamState) -> Sequence[np.ndarray]:
    """
    One bias-corrected Adam step, applied in place to params (descent).

    Raises:
        ShapeMismatchError: If grads do not match params or the moment buffers
    """
    if len(params) != len(grads) or len(params) != len(st.m):
        raise ShapeMismatchError(
            f"{len(params)} params, {len(grads)} grads, {len(st.m)} moment buffers"
        )
    for p, g, m in zip(params, grads, st.m):
        if np.shape(p) != np.shape(g) or np.shape(p) != m.shape:
            raise ShapeMismatchError(f"gradient shape {np.shape(g)} does not match {np.shape(p)}")

    st.t += 1
    c1 = 1.0 - st.beta1 ** st.t
    c2 = 1.0 - st.beta2 ** st.t
    for p, g, m, v in zip(params, grads, st.m, st.v):
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * g * g
        p -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
    return params


def log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) without cancellation for large |u|."""
    return 2.0 * (LOG2 - u - np.logaddexp(0.0, -2.0 * u))


@dataclass
class SquashedSample:
    """A squashed-Gaussian draw with the intermediates needed for gradients."""

    action: np.ndarray
    log_prob: np.ndarray
    u: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    log_std: np.ndarray
    log_std_active: np.ndarray = field(repr=False)


class GaussianHead:
    """
    Diagonal Gaussian over pre-squash u = mu + sigma * eps, mapped to [lo, hi]
    by a = lo + (hi - lo) * (tanh(u) + 1) / 2.

    The feature vector is the raw network output [mu (d), log_std (d)]; log_std
    is clamped to [-20, 2] and the clamp has zero gradient outside its range.
    """

    def __init__(self, low, high):
        self.low = np.atleast_1d(np.asarray(low, dtype=float))
        self.high = np.atleast_1d(np.asarray(high, dtype=float))
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise ShapeMismatchError("action bounds must match in shape with high > low")
        self.scale = 0.5 * (self.high - self.low)
        self._log_scale = np.log(self.scale)

    @property
    def action_dim(self) -> int:
        return self.low.size

    @property
    def feature_dim(self) -> int:
        return 2 * self.action_dim

    def split(self, features) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (mu, clamped log_std, mask of unclamped entries)."""
        f = np.asarray(features, dtype=float)
        if f.shape[-1] != self.feature_dim:
            raise ShapeMismatchError(f"expected {self.feature_dim} head features, got {f.shape[-1]}")
        d = self.action_dim
        mu, raw = f[..., :d], f[..., d:]
        active = (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)
        return mu, np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), active

    def squash(self, u: np.ndarray) -> np.ndarray:
        return self.low + self.scale * (np.tanh(u) + 1.0)

    def unsquash(self, action) -> np.ndarray:
        y = (np.asarray(action, dtype=float) - self.low) / self.scale - 1.0
        return np.arctanh(np.clip(y, -ATANH_EDGE, ATANH_EDGE))

    def _log_prob_u(self, u, eps, log_std) -> np.ndarray:
        per_dim = -0.5 * eps ** 2 - log_std - HALF_LOG_2PI - log1m_tanh_sq(u) - self._log_scale
        return per_dim.sum(axis=-1)

    def sample_squashed(
        self,
        features,
        rng: Optional[np.random.Generator],
        deterministic: bool = False,
    ) -> SquashedSample:
        """
        Draw a reparameterized action.

        Deterministic mode returns the squashed mean (eps = 0); log_prob is the
        density at that point.
        """
        mu, log_std, active = self.split(features)
        if deterministic:
            eps = np.zeros_like(mu)
        else:
            eps = rng.standard_normal(mu.shape)
        u = mu + np.exp(log_std) * eps
        return SquashedSample(
            action=self.squash(u),
            log_prob=self._log_prob_u(u, eps, log_std),
            u=u,
            eps=eps,
            mu=mu,
            log_std=log_std,
            log_std_active=active,
        )

    def log_prob(self, features, action) -> np.ndarray:
        """Density of a stored action, inverting the squash."""
        mu, log_std, _ = self.split(features)
        u = self.unsquash(action)
        eps = (u - mu) / np.exp(log_std)
        return self._log_prob_u(u, eps, log_std)

    def recover(self, features, action) -> SquashedSample:
        """Rebuild the sample of a stored action so reparameterized gradients can flow through it."""
        mu, log_std, active = self.split(features)
        u = self.unsquash(action)
        eps = (u - mu) / np.exp(log_std)
        return SquashedSample(
            action=np.asarray(action, dtype=float),
            log_prob=self._log_prob_u(u, eps, log_std),
            u=u,
            eps=eps,
            mu=mu,
            log_std=log_std,
            log_std_active=active,
        )

    def backward(self, sample: SquashedSample, grad_action=None, grad_log_prob=None) -> np.ndarray:
        """
        Reparameterized gradient (eps held fixed) with respect to the head features.

        Args:
            sample: Sample from sample_squashed or recover
            grad_action: dLoss/dAction, shape of sample.action
            grad_log_prob: dLoss/dLogProb, shape of sample.log_prob

        Returns:
            dLoss/dFeatures
        """
        y = np.tanh(sample.u)
        sigma_eps = np.exp(sample.log_std) * sample.eps
        g_u = np.zeros_like(sample.u)
        g_log_std = np.zeros_like(sample.u)
        if grad_action is not None:
            g_u = g_u + np.asarray(grad_action, dtype=float) * self.scale * (1.0 - y * y)
        if grad_log_prob is not None:
            g_lp = np.asarray(grad_log_prob, dtype=float)[..., None]
            # d(-log(1 - tanh^2 u))/du = 2 tanh u; log_std also enters directly
            g_u = g_u + g_lp * 2.0 * y
            g_log_std = g_log_std - g_lp
        g_mu = g_u
        g_log_std = (g_log_std + g_u * sigma_eps) * sample.log_std_active
        return np.concatenate([g_mu, g_log_std], axis=-1)

    def score_backward(self, sample: SquashedSample, grad_log_prob) -> np.ndarray:
        """
        Score-function gradient with the action (hence u) held fixed.

        d log pi / d mu = eps / sigma and d log pi / d log_std = eps^2 - 1.
        """
        g_lp = np.asarray(grad_log_prob, dtype=float)[..., None]
        g_mu = g_lp * sample.eps / np.exp(sample.log_std)
        g_log_std = g_lp * (sample.eps ** 2 - 1.0) * sample.log_std_active
        return np.concatenate([g_mu, g_log_std], axis=-1)


@dataclass
class GaussianMlpPolicy:
    """Squashed-Gaussian policy: an Mlp producing head features."""

    net: Mlp
    head: GaussianHead

    @classmethod
    def build(
        cls,
        in_dim: int,
        hidden: int,
        hidden_layers: int,
        low,
        high,
        rng: np.random.Generator,
    ) -> "GaussianMlpPolicy":
        head = GaussianHead(low, high)
        sizes = [in_dim] + [hidden] * hidden_layers + [head.feature_dim]
        return cls(net=Mlp(sizes, rng=rng, output_scale=0.1), head=head)

    def sample(self, x, rng: Optional[np.random.Generator], deterministic: bool = False):
        """Returns (sample, tape)."""
        features, tape = self.net.forward_with_tape(x)
        return self.head.sample_squashed(features, rng, deterministic=deterministic), tape

    def act(self, x, rng: Optional[np.random.Generator], deterministic: bool = False) -> np.ndarray:
        return self.head.sample_squashed(self.net.forward(x), rng, deterministic=deterministic).action

    def copy(self) -> "GaussianMlpPolicy":
        return GaussianMlpPolicy(net=self.net.copy(), head=GaussianHead(self.head.low, self.head.high))

    def state_dict(self) -> dict[str, Any]:
        return {
            "net": self.net.state_dict(),
            "low": self.head.low.tolist(),
            "high": self.head.high.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "GaussianMlpPolicy":
        return cls(net=Mlp.from_state(state["net"]), head=GaussianHead(state["low"], state["high"]))

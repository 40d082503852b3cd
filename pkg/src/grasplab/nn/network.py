"""Gaussian policy/value networks over the shared tensor core.

Architectures: an optional stack of valid-padding strided convolutions
(relu), a flatten, one or more tanh dense hidden layers, then three
heads sharing the trunk: action mean, a state-independent learned
log-std vector, and a scalar value estimate.

Four image presets are supported, keyed by input resolution:

    32  -> conv(4 filters, kernel 2, stride 4), conv(8, 1, 2)
    80  -> conv(16, 8, 4), conv(32, 4, 2)
    128 -> the 80 stack plus conv(64, 2, 1)
    256 -> the 128 stack plus conv(72, 2, 1)

Vector inputs skip the conv stack entirely.

Training code works with ParameterSet, a name-keyed dict of leaf tensors;
the flatten/assign helpers give optimizers a single contiguous view.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from grasplab import accel
from grasplab.errors import ShapeMismatch, UnsupportedResolution
from grasplab.nn.tensor import Tensor, parameter

LOG_STD_INIT = math.log(0.5)
_LOG_2PI = math.log(2.0 * math.pi)

ParameterSet = dict[str, Tensor]


@dataclass(frozen=True)
class ConvLayer:
    filters: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; hashable content for checkpoint headers."""

    input_shape: tuple[int, ...]  # (C, H, W) for images, (D,) for vectors
    conv_layers: tuple[ConvLayer, ...] = ()
    hidden: tuple[int, ...] = (256,)
    action_dim: int = 4

    def __post_init__(self) -> None:
        if len(self.input_shape) not in (1, 3):
            raise ShapeMismatch(f"input_shape must be (D,) or (C,H,W), got {self.input_shape}")
        if len(self.input_shape) == 1 and self.conv_layers:
            raise ShapeMismatch("conv layers need an image input")
        if self.action_dim < 1 or not self.hidden:
            raise ShapeMismatch("need action_dim >= 1 and at least one hidden layer")
        self.feature_dim()  # validates spatial sizes stay >= 1

    def feature_dim(self) -> int:
        """Flat width after the conv stack (or the raw vector width)."""
        if len(self.input_shape) == 1:
            return self.input_shape[0]
        c, h, w = self.input_shape
        for layer in self.conv_layers:
            h = (h - layer.kernel) // layer.stride + 1
            w = (w - layer.kernel) // layer.stride + 1
            c = layer.filters
            if h < 1 or w < 1:
                raise ShapeMismatch(
                    f"conv stack shrinks spatial size below 1 at {layer}"
                )
        return c * h * w

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


_PRESETS: dict[int, tuple[ConvLayer, ...]] = {
    32: (ConvLayer(4, 2, 4), ConvLayer(8, 1, 2)),
    80: (ConvLayer(16, 8, 4), ConvLayer(32, 4, 2)),
}
_PRESETS[128] = _PRESETS[80] + (ConvLayer(64, 2, 1),)
_PRESETS[256] = _PRESETS[128] + (ConvLayer(72, 2, 1),)


def arch_preset(
    resolution: int,
    channels: int = 1,
    action_dim: int = 4,
    hidden: tuple[int, ...] = (256,),
) -> NetworkSpec:
    """The conv stack matched to one of the supported square resolutions."""
    if resolution not in _PRESETS:
        raise UnsupportedResolution(
            f"no preset for {resolution}; supported: {sorted(_PRESETS)}"
        )
    return NetworkSpec(
        input_shape=(channels, resolution, resolution),
        conv_layers=_PRESETS[resolution],
        hidden=hidden,
        action_dim=action_dim,
    )


def vector_spec(
    in_dim: int, action_dim: int = 4, hidden: tuple[int, ...] = (64, 64)
) -> NetworkSpec:
    """MLP architecture for low-dimensional observations."""
    return NetworkSpec(input_shape=(in_dim,), hidden=hidden, action_dim=action_dim)


def init_params(
    spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32
) -> ParameterSet:
    """Fan-in-scaled uniform weights, zero biases, log-std at ln(0.5).

    Weights draw from U(-sqrt(3/fan_in), +sqrt(3/fan_in)), giving variance
    1/fan_in. Deterministic for a given generator state.
    """

    def uniform(shape: tuple[int, ...], fan_in: int) -> Tensor:
        bound = math.sqrt(3.0 / fan_in)
        return parameter(rng.uniform(-bound, bound, size=shape).astype(dtype))

    params: ParameterSet = {}
    if len(spec.input_shape) == 3:
        c = spec.input_shape[0]
        for i, layer in enumerate(spec.conv_layers):
            fan = c * layer.kernel * layer.kernel
            params[f"conv{i}.w"] = uniform(
                (layer.filters, c, layer.kernel, layer.kernel), fan
            )
            params[f"conv{i}.b"] = parameter(np.zeros(layer.filters, dtype=dtype))
            c = layer.filters
    width = spec.feature_dim()
    for i, h in enumerate(spec.hidden):
        params[f"dense{i}.w"] = uniform((width, h), width)
        params[f"dense{i}.b"] = parameter(np.zeros(h, dtype=dtype))
        width = h
    params["mean.w"] = uniform((width, spec.action_dim), width)
    params["mean.b"] = parameter(np.zeros(spec.action_dim, dtype=dtype))
    params["value.w"] = uniform((width, 1), width)
    params["value.b"] = parameter(np.zeros(1, dtype=dtype))
    params["log_std"] = parameter(
        np.full(spec.action_dim, LOG_STD_INIT, dtype=dtype)
    )
    return params


def _check_batch(spec: NetworkSpec, batch: np.ndarray) -> None:
    if batch.shape[1:] != spec.input_shape:
        raise ShapeMismatch(
            f"batch shape {batch.shape} does not match input {spec.input_shape}"
        )


def forward(
    spec: NetworkSpec, params: ParameterSet, batch: np.ndarray
) -> tuple[Tensor, Tensor, Tensor]:
    """Differentiable pass: returns (mean (B,A), log_std (A,), value (B,1))."""
    b = np.asarray(batch)
    _check_batch(spec, b)
    x = Tensor(b)
    if len(spec.input_shape) == 3:
        for i, layer in enumerate(spec.conv_layers):
            x = x.conv2d(
                params[f"conv{i}.w"], params[f"conv{i}.b"], layer.stride
            ).relu()
        x = x.flatten_batch()
    for i in range(len(spec.hidden)):
        x = (x @ params[f"dense{i}.w"] + params[f"dense{i}.b"]).tanh()
    mean = x @ params["mean.w"] + params["mean.b"]
    value = x @ params["value.w"] + params["value.b"]
    return mean, params["log_std"], value


def forward_np(
    spec: NetworkSpec, params: ParameterSet, batch: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Graph-free twin of forward for rollouts: (mean (B,A), value (B,))."""
    x = np.asarray(batch)
    _check_batch(spec, x)
    if len(spec.input_shape) == 3:
        for i, layer in enumerate(spec.conv_layers):
            x = accel.conv2d_forward(
                np.ascontiguousarray(x),
                params[f"conv{i}.w"].data,
                params[f"conv{i}.b"].data,
                layer.stride,
                layer.stride,
            )
            np.maximum(x, 0.0, out=x)
        x = x.reshape(x.shape[0], -1)
    for i in range(len(spec.hidden)):
        x = np.tanh(x @ params[f"dense{i}.w"].data + params[f"dense{i}.b"].data)
    mean = x @ params["mean.w"].data + params["mean.b"].data
    value = x @ params["value.w"].data + params["value.b"].data
    return mean, value[:, 0]


# ---------------------------------------------------------------------------
# Diagonal Gaussian
# ---------------------------------------------------------------------------


def gaussian_log_prob(actions, mean: Tensor, log_std: Tensor) -> Tensor:
    """Log density per sample, shape (B,), differentiable in mean/log_std."""
    a = actions if isinstance(actions, Tensor) else Tensor(
        np.asarray(actions, dtype=mean.data.dtype)
    )
    dim = mean.data.shape[-1]
    z = (a - mean) * (-log_std).exp()
    const = np.asarray(0.5 * dim * _LOG_2PI, dtype=mean.data.dtype)
    return (z * z).sum(axis=1) * np.asarray(-0.5, dtype=mean.data.dtype) - (
        log_std.sum() + const
    )


def gaussian_entropy(log_std: Tensor) -> Tensor:
    """Total entropy of the diagonal Gaussian (nats), a differentiable scalar."""
    dim = log_std.data.shape[-1]
    const = np.asarray(0.5 * dim * (1.0 + _LOG_2PI), dtype=log_std.data.dtype)
    return log_std.sum() + const


def gaussian_log_prob_np(
    actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray
) -> np.ndarray:
    """Graph-free twin of gaussian_log_prob."""
    z = (actions - mean) * np.exp(-log_std)
    return (
        -0.5 * (z * z).sum(axis=-1)
        - log_std.sum()
        - 0.5 * mean.shape[-1] * _LOG_2PI
    )


def gaussian_sample(
    mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw actions; sampling is not differentiated."""
    return mean + np.exp(log_std) * rng.standard_normal(mean.shape)


class GaussianPolicy:
    """Policy + value function sharing one trunk; owns its parameters."""

    def __init__(
        self, spec: NetworkSpec, params: ParameterSet | None = None, seed: int = 0
    ) -> None:
        self.spec = spec
        self.params = (
            params
            if params is not None
            else init_params(spec, np.random.default_rng(seed))
        )

    def act(
        self, obs: np.ndarray, rng: np.random.Generator, deterministic: bool = False
    ) -> tuple[np.ndarray, float, float]:
        """One observation in, (action, log_prob, value) out. No graph."""
        batch = np.asarray(obs)[None, ...]
        mean, value = forward_np(self.spec, self.params, batch)
        log_std = self.params["log_std"].data
        if deterministic:
            action = mean[0]
        else:
            action = gaussian_sample(mean, log_std, rng)[0]
        logp = float(gaussian_log_prob_np(action[None, :], mean, log_std)[0])
        return action.astype(np.float64), logp, float(value[0])

    def evaluate(
        self, obs_batch: np.ndarray, action_batch: np.ndarray
    ) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        """Differentiable (log_prob (B,), entropy scalar, value (B,1), mean)."""
        mean, log_std, value = forward(self.spec, self.params, obs_batch)
        logp = gaussian_log_prob(action_batch, mean, log_std)
        return logp, gaussian_entropy(log_std), value, mean

    def value_np(self, obs_batch: np.ndarray) -> np.ndarray:
        return forward_np(self.spec, self.params, obs_batch)[1]

    # -- flat parameter plumbing for trust-region updates --------------------

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def set_flat_params(self, flat: np.ndarray) -> None:
        total = sum(p.data.size for p in self.params.values())
        if flat.size != total:
            raise ShapeMismatch(
                f"flat vector has {flat.size} values, parameters need {total}"
            )
        i = 0
        for p in self.params.values():
            n = p.data.size
            p.data = flat[i : i + n].reshape(p.data.shape).astype(p.data.dtype)
            i += n

    def flat_grads(self) -> np.ndarray:
        out = []
        for p in self.params.values():
            out.append(
                (p.grad if p.grad is not None else np.zeros_like(p.data)).ravel()
            )
        return np.concatenate(out)

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

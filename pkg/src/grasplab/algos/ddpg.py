"""Deep deterministic policy gradient with target networks and replay.

The actor maps an observation to a deterministic action through a tanh,
keeping outputs in [-1, 1]; exploration adds plain Gaussian noise to that
mean and re-clamps. The critic consumes the trunk features concatenated
with the action and regresses toward

    y = r + gamma * (1 - done) * Q_target(s', actor_target(s'))

from uniform replay samples; the actor then ascends the critic's value of
its own actions. Both target networks trail their online twins by the
soft update theta_target += tau * (theta - theta_target).

The actor reuses the shared policy architecture; its value head and
log-std parameters exist but are never trained or read here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grasplab import accel
from grasplab.algos.common import Adam, ReplayBuffer
from grasplab.errors import BufferUnderflow, ConfigError, NonFiniteError
from grasplab.nn.network import (
    NetworkSpec,
    ParameterSet,
    forward,
    forward_np,
    init_params,
)
from grasplab.nn.tensor import Tensor, parameter


@dataclass(frozen=True)
class DdpgConfig:
    noise_std: float = 0.1
    capacity: int = 100_000
    batch: int = 64
    tau: float = 0.005
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.99
    warmup: int = 1_000
    update_every: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must be in (0, 1]")
        if self.capacity < self.batch:
            raise ConfigError("replay capacity must be >= batch size")
        if self.noise_std < 0.0:
            raise ConfigError("noise_std must be >= 0")


# -- critic network ----------------------------------------------------------
# Same trunk family as the policy nets, but the action joins the flat
# features before the dense stack and the single head reads out Q.


def init_critic(
    spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32
) -> ParameterSet:
    def uniform(shape: tuple[int, ...], fan_in: int) -> Tensor:
        bound = np.sqrt(3.0 / fan_in)
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
    width = spec.feature_dim() + spec.action_dim
    for i, h in enumerate(spec.hidden):
        params[f"dense{i}.w"] = uniform((width, h), width)
        params[f"dense{i}.b"] = parameter(np.zeros(h, dtype=dtype))
        width = h
    params["q.w"] = uniform((width, 1), width)
    params["q.b"] = parameter(np.zeros(1, dtype=dtype))
    return params


def critic_forward(
    spec: NetworkSpec, params: ParameterSet, obs: np.ndarray, action
) -> Tensor:
    """Differentiable Q(s, a), shape (B, 1); ``action`` may carry a graph."""
    x = Tensor(np.asarray(obs))
    if len(spec.input_shape) == 3:
        for i, layer in enumerate(spec.conv_layers):
            x = x.conv2d(params[f"conv{i}.w"], params[f"conv{i}.b"], layer.stride).relu()
        x = x.flatten_batch()
    a = action if isinstance(action, Tensor) else Tensor(
        np.asarray(action, dtype=x.data.dtype)
    )
    x = x.concat_cols(a)
    for i in range(len(spec.hidden)):
        x = (x @ params[f"dense{i}.w"] + params[f"dense{i}.b"]).tanh()
    return x @ params["q.w"] + params["q.b"]


def critic_forward_np(
    spec: NetworkSpec, params: ParameterSet, obs: np.ndarray, action: np.ndarray
) -> np.ndarray:
    """Graph-free Q(s, a), shape (B,)."""
    x = np.asarray(obs)
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
    x = np.concatenate([x, np.asarray(action, dtype=x.dtype)], axis=1)
    for i in range(len(spec.hidden)):
        x = np.tanh(x @ params[f"dense{i}.w"].data + params[f"dense{i}.b"].data)
    return (x @ params["q.w"].data + params["q.b"].data)[:, 0]


# -- actor helpers -----------------------------------------------------------


def actor_forward(spec: NetworkSpec, params: ParameterSet, obs: np.ndarray) -> Tensor:
    """Differentiable deterministic action tanh(mean(s)), shape (B, A)."""
    mean, _, _ = forward(spec, params, obs)
    return mean.tanh()


def actor_forward_np(
    spec: NetworkSpec, params: ParameterSet, obs: np.ndarray
) -> np.ndarray:
    mean, _ = forward_np(spec, params, obs)
    return np.tanh(mean)


def exploration_action(
    spec: NetworkSpec,
    params: ParameterSet,
    obs: np.ndarray,
    noise_std: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Actor mean plus i.i.d. Gaussian noise, clamped back into [-1, 1]."""
    mu = actor_forward_np(spec, params, np.asarray(obs)[None, ...])[0]
    if noise_std > 0.0:
        mu = mu + rng.normal(0.0, noise_std, size=mu.shape)
    return np.clip(mu, -1.0, 1.0)


def soft_update(target: ParameterSet, online: ParameterSet, tau: float) -> None:
    """theta_target += tau * (theta_online - theta_target), in place."""
    for k, p in online.items():
        t = target[k]
        t.data += (tau * (p.data - t.data)).astype(t.data.dtype)


def _clone(params: ParameterSet) -> ParameterSet:
    return {k: parameter(p.data.copy()) for k, p in params.items()}


class DdpgTrainer:
    """Off-policy trainer: observe() transitions, update() when ready."""

    kind = "off_policy"

    def __init__(
        self,
        spec: NetworkSpec,
        cfg: DdpgConfig | None = None,
        seed: int = 0,
    ) -> None:
        self.spec = spec
        self.cfg = cfg or DdpgConfig()
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(3,))
        init_rng, self.rng = [np.random.default_rng(s) for s in ss.spawn(2)]
        self.actor = init_params(spec, init_rng)
        self.critic = init_critic(spec, init_rng)
        self.target_actor = _clone(self.actor)
        self.target_critic = _clone(self.critic)
        self.actor_opt = Adam(self.actor)
        self.critic_opt = Adam(self.critic)
        self.buffer = ReplayBuffer(self.cfg.capacity)
        self._steps_seen = 0

    # -- interaction ----------------------------------------------------------

    def act(self, obs: np.ndarray, explore: bool = True) -> np.ndarray:
        std = self.cfg.noise_std if explore else 0.0
        return exploration_action(self.spec, self.actor, obs, std, self.rng)

    def observe(
        self,
        obs: np.ndarray,
        action: np.ndarray,
        reward: float,
        next_obs: np.ndarray,
        done: bool,
    ) -> None:
        self.buffer.add(obs, action, reward, next_obs, done)
        self._steps_seen += 1

    def ready(self) -> bool:
        return (
            self._steps_seen >= self.cfg.warmup
            and len(self.buffer) >= self.cfg.batch
            and self._steps_seen % self.cfg.update_every == 0
        )

    # -- learning -------------------------------------------------------------

    def update(self) -> dict:
        """One critic regression step, one actor ascent step, soft updates."""
        cfg = self.cfg
        if len(self.buffer) < cfg.batch:
            raise BufferUnderflow(
                f"replay holds {len(self.buffer)} < batch {cfg.batch}"
            )
        batch = self.buffer.sample(cfg.batch, self.rng)
        obs = batch["obs"]
        act = batch["act"]
        rew = batch["rew"].astype(np.float32)
        next_obs = batch["next_obs"]
        done = batch["done"].astype(np.float32)

        next_act = actor_forward_np(self.spec, self.target_actor, next_obs)
        next_q = critic_forward_np(self.spec, self.target_critic, next_obs, next_act)
        target = rew + cfg.gamma * (1.0 - done) * next_q.astype(np.float32)

        q = critic_forward(self.spec, self.critic, obs, act)
        err = q.reshape(-1) - target
        critic_loss = (err * err).mean()
        if not np.isfinite(critic_loss.data):
            raise NonFiniteError("ddpg critic loss diverged")
        for p in self.critic.values():
            p.grad = None
        critic_loss.backward()
        self.critic_opt.step(cfg.critic_lr)

        a = actor_forward(self.spec, self.actor, obs)
        q_of_mu = critic_forward(self.spec, self.critic, obs, a)
        actor_loss = -q_of_mu.mean()
        for p in self.actor.values():
            p.grad = None
        for p in self.critic.values():
            p.grad = None
        actor_loss.backward()
        self.actor_opt.step(cfg.actor_lr)

        soft_update(self.target_actor, self.actor, cfg.tau)
        soft_update(self.target_critic, self.critic, cfg.tau)
        return {
            "critic_loss": float(critic_loss.data),
            "actor_loss": float(actor_loss.data),
            "mean_q": float(q.data.mean()),
        }

"""Shared trainer machinery: trajectories, GAE, schedules, Adam, replay.

Nothing here is algorithm-specific; PPO/TRPO consume Trajectory batches
with generalized advantage estimates, DDPG consumes uniform samples from
the ring ReplayBuffer, and all of them pull step sizes from the two decay
schedules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from grasplab.errors import BadDims, BufferUnderflow, RangeError

LR_FLOOR = 1e-6
EXP_END_FACTOR = 0.01


@dataclass
class Trajectory:
    """Aligned per-step arrays for one or more concatenated episodes.

    ``dones[t]`` marks the last step of an episode; ``bootstrap_value`` is
    the value estimate of the state following the final step, used only
    when that step did not terminate.
    """

    observations: np.ndarray  # (N, ...) policy input layout
    actions: np.ndarray  # (N, A)
    log_probs: np.ndarray  # (N,)
    values: np.ndarray  # (N,)
    rewards: np.ndarray  # (N,)
    dones: np.ndarray  # (N,) bool
    bootstrap_value: float = 0.0

    def __post_init__(self) -> None:
        n = len(self.rewards)
        for name in ("observations", "actions", "log_probs", "values", "dones"):
            if len(getattr(self, name)) != n:
                raise BadDims(f"trajectory field {name} misaligned with rewards")

    def __len__(self) -> int:
        return len(self.rewards)


def compute_advantages(
    traj: Trajectory, gamma: float = 0.99, lam: float = 0.95
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets, both (N,) float64.

    A_t = sum_k (gamma*lam)^k delta_{t+k} with the recursion cut at episode
    boundaries; returns_t = A_t + V(s_t). With lam = 1 this reduces to
    discounted returns minus values. Advantages come back raw; the
    trainers normalize per batch right before the policy loss.
    """
    n = len(traj)
    adv = np.zeros(n, dtype=np.float64)
    values = np.asarray(traj.values, dtype=np.float64)
    rewards = np.asarray(traj.rewards, dtype=np.float64)
    dones = np.asarray(traj.dones, dtype=bool)
    gae = 0.0
    next_value = float(traj.bootstrap_value)
    for t in range(n - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * live - values[t]
        gae = delta + gamma * lam * live * gae
        adv[t] = gae
        next_value = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance rescale; degenerate batches pass through."""
    std = adv.std()
    if std < 1e-8:
        return adv - adv.mean()
    return (adv - adv.mean()) / std


def lr_schedule(
    kind: str, initial: float, step: int, horizon: int, power: float = 1.0
) -> float:
    """Decayed learning rate at ``step`` of a ``horizon``-step run.

    polynomial: initial * (1 - step/horizon)^power, floored at 1e-6
    exponential: initial * 0.01^(step/horizon)

    Both hold their final value once step reaches the horizon.
    """
    if initial <= 0.0:
        raise RangeError("initial learning rate must be positive")
    if horizon < 1:
        raise RangeError("horizon must be >= 1")
    frac = min(max(step, 0), horizon) / horizon
    if kind == "polynomial":
        return max(initial * (1.0 - frac) ** power, LR_FLOOR)
    if kind == "exponential":
        return initial * EXP_END_FACTOR**frac
    raise RangeError(f"unknown lr schedule kind {kind!r}")


def beta_schedule(initial: float, step: int, horizon: int) -> float:
    """Entropy coefficient decaying linearly at half the lr decay speed.

    Reaches initial/2 (not 0) at the end of the run, keeping some
    exploration pressure throughout.
    """
    if horizon < 1:
        raise RangeError("horizon must be >= 1")
    frac = min(max(step, 0), horizon) / horizon
    return initial * (1.0 - 0.5 * frac)


class Adam:
    """Adaptive-moment gradient descent over a named parameter dict."""

    def __init__(
        self,
        params: dict,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float) -> None:
        """Apply one update from the gradients currently on the parameters."""
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data -= (lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)).astype(
                p.data.dtype
            )

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat view of optimizer state for resume files."""
        out: dict[str, np.ndarray] = {"t": np.array([self.t], dtype=np.int64)}
        for k in self.params:
            out[f"m/{k}"] = self.m[k]
            out[f"v/{k}"] = self.v[k]
        return out

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"][0])
        for k in self.params:
            self.m[k] = state[f"m/{k}"].astype(self.m[k].dtype).reshape(self.m[k].shape)
            self.v[k] = state[f"v/{k}"].astype(self.v[k].dtype).reshape(self.v[k].shape)


@dataclass
class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s', done) transitions."""

    capacity: int
    _size: int = 0
    _head: int = 0
    _storage: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise BadDims("replay capacity must be >= 1")

    def __len__(self) -> int:
        return self._size

    def add(
        self,
        obs: np.ndarray,
        action: np.ndarray,
        reward: float,
        next_obs: np.ndarray,
        done: bool,
    ) -> None:
        if not self._storage:
            cap = self.capacity
            self._storage = {
                "obs": np.zeros((cap,) + np.shape(obs), dtype=np.float32),
                "act": np.zeros((cap,) + np.shape(action), dtype=np.float32),
                "rew": np.zeros(cap, dtype=np.float32),
                "next_obs": np.zeros((cap,) + np.shape(next_obs), dtype=np.float32),
                "done": np.zeros(cap, dtype=bool),
            }
        s = self._storage
        i = self._head
        s["obs"][i] = obs
        s["act"][i] = action
        s["rew"][i] = reward
        s["next_obs"][i] = next_obs
        s["done"][i] = done
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Uniform with-replacement sample of ``batch`` transitions."""
        if batch > self._size:
            raise BufferUnderflow(f"asked for {batch} of {self._size} transitions")
        idx = rng.integers(0, self._size, size=batch)
        s = self._storage
        return {k: v[idx] for k, v in s.items()}

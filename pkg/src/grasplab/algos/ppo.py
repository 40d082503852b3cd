"""Proximal policy optimization with a clipped surrogate objective.

Per update: advantages are normalized over the batch, then a few epochs
of shuffled minibatch steps minimize

    -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c_v * value_mse - beta * entropy

where r is the probability ratio against the rollout policy. The clip
keeps each sample's contribution a one-sided bound: with A >= 0 the
surrogate never exceeds (1+eps) A, with A <= 0 it never falls below.
Learning rate and the entropy coefficient both decay over the run, the
entropy coefficient at half the rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grasplab.algos.common import (
    Adam,
    Trajectory,
    beta_schedule,
    compute_advantages,
    lr_schedule,
    normalize_advantages,
)
from grasplab.errors import ConfigError, NonFiniteError
from grasplab.nn.network import GaussianPolicy
from grasplab.nn.tensor import Tensor


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    epochs: int = 3
    minibatch: int = 32
    gamma: float = 0.99
    lam: float = 0.95
    lr_initial: float = 3e-4
    lr_kind: str = "polynomial"
    lr_power: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must be in (0, 1)")
        if self.entropy_coef < 0.0 or self.value_coef < 0.0:
            raise ConfigError("coefficients must be >= 0")
        if self.epochs < 1 or self.minibatch < 1:
            raise ConfigError("epochs and minibatch must be >= 1")


def clipped_surrogate(ratio: Tensor, advantages: np.ndarray, eps: float) -> Tensor:
    """Per-sample min(r A, clip(r) A); the caller takes the mean."""
    adv = np.asarray(advantages, dtype=ratio.data.dtype)
    return (ratio * adv).minimum(ratio.clip(1.0 - eps, 1.0 + eps) * adv)


def ppo_loss(
    policy: GaussianPolicy,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    clip_eps: float,
    value_coef: float,
    entropy_coef: float,
) -> tuple[Tensor, dict]:
    """Build the differentiable loss for one minibatch; returns (loss, stats)."""
    logp, entropy, value, _ = policy.evaluate(obs, actions)
    dtype = logp.data.dtype
    old = np.asarray(old_log_probs, dtype=dtype)
    ratio = (logp - old).exp()
    surr = clipped_surrogate(ratio, advantages, clip_eps).mean()
    v_err = value.reshape(-1) - np.asarray(returns, dtype=dtype)
    v_loss = (v_err * v_err).mean()
    loss = (
        -surr
        + v_loss * np.asarray(value_coef, dtype=dtype)
        - entropy * np.asarray(entropy_coef, dtype=dtype)
    )
    with np.errstate(over="ignore"):
        clip_frac = float(np.mean(np.abs(ratio.data - 1.0) > clip_eps))
    stats = {
        "surrogate": float(surr.data),
        "value_loss": float(v_loss.data),
        "entropy": float(entropy.data),
        "approx_kl": float(np.mean(old - logp.data)),
        "clip_fraction": clip_frac,
    }
    return loss, stats


class PpoTrainer:
    """On-policy trainer; feed complete rollouts through update()."""

    kind = "on_policy"

    def __init__(
        self,
        policy: GaussianPolicy,
        cfg: PpoConfig | None = None,
        horizon_steps: int = 100_000,
        seed: int = 0,
    ) -> None:
        self.policy = policy
        self.cfg = cfg or PpoConfig()
        self.horizon = max(1, horizon_steps)
        self.opt = Adam(policy.params)
        self.rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))

    def update(self, traj: Trajectory, steps_done: int) -> dict:
        """Several epochs of minibatch steps on one rollout batch."""
        cfg = self.cfg
        adv, returns = compute_advantages(traj, cfg.gamma, cfg.lam)
        adv = normalize_advantages(adv)
        lr = lr_schedule(cfg.lr_kind, cfg.lr_initial, steps_done, self.horizon, cfg.lr_power)
        beta = beta_schedule(cfg.entropy_coef, steps_done, self.horizon)
        n = len(traj)
        stats: dict = {}
        count = 0
        for _ in range(cfg.epochs):
            order = self.rng.permutation(n)
            for lo in range(0, n, cfg.minibatch):
                idx = order[lo : lo + cfg.minibatch]
                loss, mb_stats = ppo_loss(
                    self.policy,
                    traj.observations[idx],
                    traj.actions[idx],
                    traj.log_probs[idx],
                    adv[idx],
                    returns[idx],
                    cfg.clip_eps,
                    cfg.value_coef,
                    beta,
                )
                if not np.isfinite(loss.data):
                    raise NonFiniteError(
                        f"ppo loss diverged at env step {steps_done}: {mb_stats}"
                    )
                self.policy.zero_grads()
                loss.backward()
                self.opt.step(lr)
                count += 1
                for k, v in mb_stats.items():
                    stats[k] = stats.get(k, 0.0) + v
        out = {k: v / count for k, v in stats.items()}
        out["lr"] = lr
        out["beta"] = beta
        return out

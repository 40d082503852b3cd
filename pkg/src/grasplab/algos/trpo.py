"""Trust-region policy optimization.

Each update solves (F + damping I) x = g by conjugate gradient, where g is
the surrogate gradient at the current parameters and F the Fisher
information of the action distribution, then scales x to the KL boundary
and backtracks until the surrogate actually improves while the measured
mean KL stays within delta. A step that never satisfies both is abandoned
(zero step, logged in the stats), never fatal.

Fisher-vector products use the Gaussian structure instead of a second
backward pass: for mean-producing parameters F v = J^T diag(1/sigma^2) J v,
with J v obtained by a central finite difference of the mean outputs and
J^T applied by an exact vector-Jacobian product through the graph; the
state-independent log-std block contributes exactly 2 v per sample. All
update math runs in double precision: the trainer converts the policy's
parameters to float64 at construction, since finite-difference products
inside conjugate gradient are meaningless at float32 resolution.

The value head is fit separately by plain gradient descent and only the
head's own weights move, so the shared trunk is touched exclusively by
trust-region steps and the KL guarantee stays intact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from grasplab.algos.common import Trajectory, compute_advantages, normalize_advantages
from grasplab.errors import ConfigError
from grasplab.nn.network import (
    GaussianPolicy,
    forward,
    forward_np,
    gaussian_log_prob,
    gaussian_log_prob_np,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrpoConfig:
    delta: float = 0.01
    cg_iters: int = 10
    cg_tol: float = 1e-10
    damping: float = 0.1
    backtrack_coef: float = 0.8
    backtrack_steps: int = 10
    gamma: float = 0.99
    lam: float = 0.95
    value_lr: float = 1e-2
    value_iters: int = 30

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ConfigError("kl bound delta must be positive")
        if not 0.0 < self.backtrack_coef < 1.0:
            raise ConfigError("backtrack_coef must be in (0, 1)")


def conjugate_gradient(
    matvec, b: np.ndarray, iters: int, tol: float = 1e-10
) -> np.ndarray:
    """Solve A x = b for symmetric positive-definite A given x -> A x."""
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    rr = float(r @ r)
    for _ in range(iters):
        if rr < tol:
            break
        ap = matvec(p)
        alpha = rr / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def gaussian_mean_kl(
    mean_old: np.ndarray,
    log_std_old: np.ndarray,
    mean_new: np.ndarray,
    log_std_new: np.ndarray,
) -> float:
    """Closed-form KL(old || new) for diagonal Gaussians, averaged over states."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    per_dim = (
        log_std_new
        - log_std_old
        + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new)
        - 0.5
    )
    return float(per_dim.sum(axis=-1).mean())


class TrpoTrainer:
    """On-policy trainer; feed complete rollouts through update()."""

    kind = "on_policy"

    def __init__(
        self,
        policy: GaussianPolicy,
        cfg: TrpoConfig | None = None,
        horizon_steps: int = 100_000,
        seed: int = 0,
    ) -> None:
        self.policy = policy
        self.cfg = cfg or TrpoConfig()
        self.horizon = max(1, horizon_steps)
        for p in policy.params.values():
            p.data = p.data.astype(np.float64)
        self._offsets: dict[str, tuple[int, int]] = {}
        i = 0
        for name, p in policy.params.items():
            self._offsets[name] = (i, i + p.data.size)
            i += p.data.size

    # -- pieces ---------------------------------------------------------------

    def _surrogate_grad(
        self, obs: np.ndarray, actions: np.ndarray, adv: np.ndarray, old_logp: np.ndarray
    ) -> np.ndarray:
        mean, log_std, _ = forward(self.policy.spec, self.policy.params, obs)
        logp = gaussian_log_prob(actions, mean, log_std)
        surr = ((logp - old_logp).exp() * adv).mean()
        self.policy.zero_grads()
        surr.backward()
        return self.policy.flat_grads()

    def _fisher_vector_product(
        self, obs: np.ndarray, v: np.ndarray
    ) -> np.ndarray:
        """(F + damping) v via finite-difference JVP and exact VJP."""
        policy = self.policy
        theta = policy.flat_params()
        v_norm = float(np.linalg.norm(v))
        if v_norm == 0.0:
            return self.cfg.damping * v
        h = 1e-5 * (1.0 + float(np.linalg.norm(theta))) / v_norm
        policy.set_flat_params(theta + h * v)
        mean_plus, _ = forward_np(policy.spec, policy.params, obs)
        policy.set_flat_params(theta - h * v)
        mean_minus, _ = forward_np(policy.spec, policy.params, obs)
        policy.set_flat_params(theta)
        jv = (mean_plus - mean_minus) / (2.0 * h)  # (B, A)

        inv_var = np.exp(-2.0 * policy.params["log_std"].data)
        mean, _, _ = forward(policy.spec, policy.params, obs)
        policy.zero_grads()
        mean.backward(grad=jv * inv_var / obs.shape[0])
        out = policy.flat_grads()

        lo, hi = self._offsets["log_std"]
        out[lo:hi] += 2.0 * v[lo:hi]
        return out + self.cfg.damping * v

    def _fit_value(self, obs: np.ndarray, returns: np.ndarray) -> float:
        """Plain gradient descent on the value head's own parameters."""
        policy = self.policy
        head = {k: policy.params[k] for k in ("value.w", "value.b")}
        last = 0.0
        for _ in range(self.cfg.value_iters):
            _, _, value = forward(policy.spec, policy.params, obs)
            err = value.reshape(-1) - returns
            loss = (err * err).mean()
            policy.zero_grads()
            loss.backward()
            for p in head.values():
                if p.grad is not None:
                    p.data -= self.cfg.value_lr * p.grad
            last = float(loss.data)
        return last

    # -- the update -----------------------------------------------------------

    def update(self, traj: Trajectory, steps_done: int = 0) -> dict:
        cfg = self.cfg
        policy = self.policy
        adv, returns = compute_advantages(traj, cfg.gamma, cfg.lam)
        adv = normalize_advantages(adv)
        obs = np.asarray(traj.observations, dtype=np.float64)
        actions = np.asarray(traj.actions, dtype=np.float64)

        mean_old, _ = forward_np(policy.spec, policy.params, obs)
        log_std_old = policy.params["log_std"].data.copy()
        old_logp = gaussian_log_prob_np(actions, mean_old, log_std_old)

        g = self._surrogate_grad(obs, actions, adv, old_logp)
        stats = {
            "grad_norm": float(np.linalg.norm(g)),
            "kl": 0.0,
            "surrogate": 0.0,
            "step_fraction": 0.0,
            "line_search_failed": False,
        }
        if stats["grad_norm"] < 1e-12:
            stats["value_loss"] = self._fit_value(obs, returns)
            return stats

        x = conjugate_gradient(
            lambda u: self._fisher_vector_product(obs, u), g, cfg.cg_iters, cfg.cg_tol
        )
        shs = float(x @ self._fisher_vector_product(obs, x))
        if shs <= 0.0:
            log.warning("non-positive curvature %.3e, skipping policy step", shs)
            stats["line_search_failed"] = True
            stats["value_loss"] = self._fit_value(obs, returns)
            return stats
        full_step = np.sqrt(2.0 * cfg.delta / shs) * x

        theta_old = policy.flat_params()
        accepted = False
        frac = 1.0
        for _ in range(cfg.backtrack_steps):
            policy.set_flat_params(theta_old + frac * full_step)
            mean_new, _ = forward_np(policy.spec, policy.params, obs)
            log_std_new = policy.params["log_std"].data
            logp = gaussian_log_prob_np(actions, mean_new, log_std_new)
            surr = float(np.mean(np.exp(logp - old_logp) * adv))
            kl = gaussian_mean_kl(mean_old, log_std_old, mean_new, log_std_new)
            if surr > 0.0 and kl <= cfg.delta:
                accepted = True
                stats.update(kl=kl, surrogate=surr, step_fraction=frac)
                break
            frac *= cfg.backtrack_coef
        if not accepted:
            policy.set_flat_params(theta_old)
            stats["line_search_failed"] = True
            log.warning("line search exhausted, keeping previous policy")

        stats["value_loss"] = self._fit_value(obs, returns)
        return stats

"""Policy-optimization algorithms: PPO, TRPO, DDPG, and shared machinery."""

from __future__ import annotations

from grasplab.algos.common import (
    Adam,
    ReplayBuffer,
    Trajectory,
    beta_schedule,
    compute_advantages,
    lr_schedule,
)
from grasplab.algos.ppo import PpoConfig, PpoTrainer
from grasplab.algos.trpo import TrpoConfig, TrpoTrainer
from grasplab.algos.ddpg import DdpgConfig, DdpgTrainer

__all__ = [
    "Adam",
    "ReplayBuffer",
    "Trajectory",
    "beta_schedule",
    "compute_advantages",
    "lr_schedule",
    "PpoConfig",
    "PpoTrainer",
    "TrpoConfig",
    "TrpoTrainer",
    "DdpgConfig",
    "DdpgTrainer",
]

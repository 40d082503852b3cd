"""Minimal reverse-mode tensor core, policy networks, checkpoints."""

from __future__ import annotations

from grasplab.nn.tensor import Tensor
from grasplab.nn.network import (
    GaussianPolicy,
    NetworkSpec,
    arch_preset,
    gaussian_entropy,
    gaussian_log_prob,
    gaussian_sample,
    init_params,
)

__all__ = [
    "Tensor",
    "GaussianPolicy",
    "NetworkSpec",
    "arch_preset",
    "gaussian_entropy",
    "gaussian_log_prob",
    "gaussian_sample",
    "init_params",
]

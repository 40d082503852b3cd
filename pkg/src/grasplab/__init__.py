"""Deterministic 2.5D block-reaching laboratory.

Synthetic tabletop scenes rendered to noisy quantized depth, shaped rewards
for a reach-and-align task, a difficulty curriculum, and small-CNN
policy-gradient trainers (PPO, TRPO, DDPG), all seedable end to end.
"""

from __future__ import annotations

from grasplab.accel import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

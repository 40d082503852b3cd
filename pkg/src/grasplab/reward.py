"""Shaped reward terms for the reach-and-align task.

Five terms are evaluated every step and summed:

  touch        +0.1 while the tool contacts the target block (boolean)
  collision    -0.1 for each other body (block or support) being contacted
  goal         +0.5 for holding position inside the goal region, plus a
               further +0.5 when the heading also matches; the heading
               bonus never pays on its own
  move_toward  k1 * (v . n): v is the raw tooltip displacement over the
               step, n the unit direction from the current position to the
               target, so the term scales with how much ground the step
               covered toward the goal
  face_target  -k2 * (z_block . z_ee): positive when the tool approach
               axis opposes the block's up axis (pointing down at an
               upright block scores +k2)

with k1 = 0.03 and k2 = 0.01 by default. A legacy face variant dots the
approach axis with the tool-to-target direction instead of the block up
axis; pass ``face_literal=True`` to get it. Degenerate geometry (already
at the target, zero-length axes) yields 0 rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grasplab.scene import ContactReport

_EPS = 1e-12


@dataclass(frozen=True)
class RewardConstants:
    """Scale factors for the five terms; defaults match the task design."""

    k1: float = 0.03  # move-toward gain
    k2: float = 0.01  # face-target gain
    touch: float = 0.1
    collision: float = -0.1
    position: float = 0.5
    rotation: float = 0.5


DEFAULTS = RewardConstants()


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-term values for one step; total is their exact float sum."""

    touch: float
    collision: float
    position: float
    rotation: float
    move_toward: float
    face_target: float

    @property
    def total(self) -> float:
        return (
            self.touch
            + self.collision
            + self.position
            + self.rotation
            + self.move_toward
            + self.face_target
        )


def reward_touch(report: ContactReport, c: RewardConstants = DEFAULTS) -> float:
    """Flat bonus while touching the target, however many contact points."""
    return c.touch if report.touching_target else 0.0


def reward_collision(report: ContactReport, c: RewardConstants = DEFAULTS) -> float:
    """Penalty proportional to the number of undesired bodies contacted."""
    if report.collision_count == 0:
        return 0.0
    return c.collision * report.collision_count


def reward_goal(pos_ok: bool, rot_ok: bool, c: RewardConstants = DEFAULTS) -> float:
    """Position bonus plus a conditional heading bonus.

    Heading alone earns nothing; it only tops up a held position.
    """
    if not pos_ok:
        return 0.0
    return c.position + (c.rotation if rot_ok else 0.0)


def reward_fmt(
    prev_pos: np.ndarray,
    cur_pos: np.ndarray,
    target: np.ndarray,
    c: RewardConstants = DEFAULTS,
) -> float:
    """k1 times the step displacement projected on the unit target direction.

    v = cur_pos - prev_pos (one step, so displacement doubles as
    velocity); n = normalize(target - cur_pos). Sitting exactly on the
    target is degenerate and returns 0.
    """
    v = np.asarray(cur_pos, dtype=np.float64) - np.asarray(prev_pos, dtype=np.float64)
    n = np.asarray(target, dtype=np.float64) - np.asarray(cur_pos, dtype=np.float64)
    nn = float(np.linalg.norm(n))
    if nn <= _EPS:
        return 0.0
    return c.k1 * float(v @ n) / nn


def reward_fft(
    z_ee: np.ndarray, z_block: np.ndarray, c: RewardConstants = DEFAULTS
) -> float:
    """-k2 times the dot of the block up axis with the tool approach axis.

    Inputs are normalized defensively, so the value lies in [-k2, +k2]
    with the extremes exactly at (anti)parallel. Zero-length axes give 0.
    """
    ee = np.asarray(z_ee, dtype=np.float64)
    up = np.asarray(z_block, dtype=np.float64)
    een = float(np.linalg.norm(ee))
    upn = float(np.linalg.norm(up))
    if een <= _EPS or upn <= _EPS:
        return 0.0
    return -c.k2 * float(up @ ee) / (een * upn)


def total_reward(
    report: ContactReport,
    pos_ok: bool,
    rot_ok: bool,
    prev_pos: np.ndarray,
    cur_pos: np.ndarray,
    target: np.ndarray,
    z_ee: np.ndarray,
    z_block: np.ndarray,
    c: RewardConstants = DEFAULTS,
    face_literal: bool = False,
) -> RewardBreakdown:
    """All five terms for one step, kept separate for logging.

    With ``face_literal`` the face term uses the unit direction from the
    current position to the target instead of the block's up axis.
    """
    face_ref = (
        np.asarray(target, dtype=np.float64) - np.asarray(cur_pos, dtype=np.float64)
        if face_literal
        else z_block
    )
    return RewardBreakdown(
        touch=reward_touch(report, c),
        collision=reward_collision(report, c),
        position=c.position if pos_ok else 0.0,
        rotation=c.rotation if (pos_ok and rot_ok) else 0.0,
        move_toward=reward_fmt(prev_pos, cur_pos, target, c),
        face_target=reward_fft(z_ee, face_ref, c),
    )

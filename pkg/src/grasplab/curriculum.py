"""Lesson schedule: success tolerances tighten as returns improve.

Nineteen lessons interpolate the planar tolerance from 0.10 m down to
0.01 m and the heading tolerance from 10 to 2 degrees, both linearly. The
vertical success band stays [0.01, 0.02] m above the block top throughout.
Each lesson carries an advance threshold on the mean episode return over a
sliding window of recent episodes; thresholds rise linearly from -0.2 to
+1.0. Crossing the threshold with a full window advances one lesson and
clears the window. The lesson index never decreases and never passes the
last lesson.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from grasplab.errors import BadSchedule

N_LESSONS = 19
WINDOW = 100
Z_BAND = (0.01, 0.02)


@dataclass(frozen=True)
class Lesson:
    """Success tolerances plus the bar for moving past this lesson."""

    index: int  # 1-based
    xy_tol: float  # meters, per axis
    z_range: tuple[float, float]  # meters above the block top face
    yaw_tol: float  # degrees
    advance_threshold: float  # mean episode return needed to advance


def build_schedule(
    start_xy: float = 0.10,
    final_xy: float = 0.01,
    start_yaw: float = 10.0,
    final_yaw: float = 2.0,
    start_threshold: float = -0.2,
    final_threshold: float = 1.0,
    n_lessons: int = N_LESSONS,
    z_range: tuple[float, float] = Z_BAND,
) -> list[Lesson]:
    """Linear tolerance/threshold interpolation across the lessons."""
    if n_lessons < 2:
        raise BadSchedule(f"need at least 2 lessons, got {n_lessons}")
    if start_xy <= final_xy or start_yaw <= final_yaw:
        raise BadSchedule("tolerances must shrink from first to last lesson")
    if start_threshold >= final_threshold:
        raise BadSchedule("advance thresholds must rise from first to last lesson")
    if not 0.0 <= z_range[0] < z_range[1]:
        raise BadSchedule(f"bad z band {z_range}")
    out = []
    for i in range(n_lessons):
        f = i / (n_lessons - 1)
        out.append(
            Lesson(
                index=i + 1,
                xy_tol=start_xy + f * (final_xy - start_xy),
                z_range=z_range,
                yaw_tol=start_yaw + f * (final_yaw - start_yaw),
                advance_threshold=start_threshold
                + f * (final_threshold - start_threshold),
            )
        )
    return out


@dataclass
class Curriculum:
    """Threshold-driven progression through a schedule.

    Mutable, single-owner: the training loop pushes one episode return at
    a time. The window slides over the last ``window`` returns; once full,
    a mean strictly above the current lesson's threshold advances exactly
    one lesson and clears the window.
    """

    schedule: list[Lesson] = field(default_factory=build_schedule)
    window: int = WINDOW
    index: int = 1
    returns: deque = field(default_factory=deque)
    episodes: int = 0

    def __post_init__(self) -> None:
        if not self.schedule:
            raise BadSchedule("empty schedule")
        if not 1 <= self.index <= len(self.schedule):
            raise BadSchedule(f"lesson index {self.index} outside schedule")
        self.returns = deque(self.returns, maxlen=self.window)

    @property
    def lesson(self) -> Lesson:
        return self.schedule[self.index - 1]

    def update(self, episode_return: float) -> bool:
        """Record one episode return; True iff the lesson just advanced."""
        self.episodes += 1
        self.returns.append(float(episode_return))
        if len(self.returns) < self.window:
            return False
        mean = sum(self.returns) / len(self.returns)
        if mean > self.lesson.advance_threshold and self.index < len(self.schedule):
            self.index += 1
            self.returns.clear()
            return True
        return False

"""Append-only CSV metrics with a fixed column order.

The first line is always the header.  Two row kinds share one schema: rows
with ``kind=episode`` carry per-episode results (return, success, lesson,
per-step reward component means), rows with ``kind=update`` carry optimizer
statistics (losses, entropy, KL, learning rate, entropy coefficient).  Cells
that do not apply to a row kind are left empty.  Floats are rendered with
``%.10g`` so that two runs producing the same numbers produce byte-identical
files; in deterministic mode the caller passes 0.0 wall-clock seconds.
"""

from __future__ import annotations

import os
from typing import IO, Mapping

COLUMNS: tuple[str, ...] = (
    "kind",
    "global_step",
    "episode",
    "lesson",
    "episode_return",
    "success",
    "episode_len",
    "r_touch",
    "r_collision",
    "r_position",
    "r_rotation",
    "r_move_toward",
    "r_face_target",
    "policy_loss",
    "value_loss",
    "entropy",
    "kl",
    "clip_fraction",
    "lr",
    "beta",
    "wall_clock_s",
)

REWARD_COLUMNS: tuple[str, ...] = (
    "r_touch",
    "r_collision",
    "r_position",
    "r_rotation",
    "r_move_toward",
    "r_face_target",
)


def format_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


class MetricsWriter:
    """Writes metrics rows to ``path``, header first, flushing per row.

    ``append=True`` continues an existing file (used when resuming a run);
    ``last_step`` then seeds the monotone global-step check.
    """

    def __init__(self, path: str, append: bool = False, last_step: int = -1) -> None:
        self.path = path
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        mode = "a" if append else "w"
        self._handle: IO[str] = open(path, mode, encoding="utf-8", newline="\n")
        if not append:
            self._handle.write(",".join(COLUMNS) + "\n")
            self._handle.flush()
        self._last_step = last_step

    def _write(self, cells: Mapping[str, object]) -> None:
        step = cells.get("global_step")
        if isinstance(step, int):
            if step < self._last_step:
                raise ValueError(
                    f"global_step went backwards: {step} after {self._last_step}"
                )
            self._last_step = step
        row = [format_cell(cells.get(name)) for name in COLUMNS]
        self._handle.write(",".join(row) + "\n")
        self._handle.flush()

    def write_episode(
        self,
        global_step: int,
        episode: int,
        lesson: int,
        episode_return: float,
        success: bool,
        episode_len: int,
        reward_means: Mapping[str, float],
        wall_clock_s: float,
    ) -> None:
        cells: dict[str, object] = {
            "kind": "episode",
            "global_step": global_step,
            "episode": episode,
            "lesson": lesson,
            "episode_return": episode_return,
            "success": success,
            "episode_len": episode_len,
            "wall_clock_s": wall_clock_s,
        }
        for name in REWARD_COLUMNS:
            cells[name] = float(reward_means[name])
        self._write(cells)

    def write_update(
        self,
        global_step: int,
        stats: Mapping[str, float],
        wall_clock_s: float,
    ) -> None:
        cells: dict[str, object] = {
            "kind": "update",
            "global_step": global_step,
            "wall_clock_s": wall_clock_s,
        }
        for name in ("policy_loss", "value_loss", "entropy", "kl", "clip_fraction", "lr", "beta"):
            if name in stats:
                cells[name] = float(stats[name])
        self._write(cells)

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def read_metrics(path: str) -> list[dict[str, str]]:
    """Read a metrics CSV back into a list of {column: text} dicts."""

    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ValueError(f"{path} is empty")
    header = tuple(lines[0].split(","))
    if header != COLUMNS:
        raise ValueError(f"{path} has unexpected header {header!r}")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(COLUMNS):
            raise ValueError(f"{path}: malformed row {line!r}")
        rows.append(dict(zip(COLUMNS, cells)))
    return rows

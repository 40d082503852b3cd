"""Run configuration, training/evaluation loops, metrics, and the CLI."""

from __future__ import annotations

from grasplab.harness.config import RunConfig, load_config
from grasplab.harness.loops import (
    EvalReport,
    TrainProgress,
    TrainResult,
    evaluate,
    render_frame_files,
    schedule_rows,
    train,
)

__all__ = [
    "RunConfig",
    "load_config",
    "EvalReport",
    "TrainProgress",
    "TrainResult",
    "evaluate",
    "render_frame_files",
    "schedule_rows",
    "train",
]

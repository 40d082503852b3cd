"""Flat-key run configuration.

A run is described by a flat dictionary of dotted keys (``env.resolution``,
``ppo.clip_eps``, ...).  Values come from, in increasing precedence:

1. built-in defaults,
2. an optional named preset (``preset: reach32``),
3. an optional YAML file (flat keys only),
4. command-line ``--override key=value`` pairs.

The merged dictionary is validated and materialized into a :class:`RunConfig`
holding the typed sub-configs the env and trainers expect.  Unknown keys and
type mismatches raise :class:`~grasplab.errors.ConfigError` rather than being
silently ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from grasplab.algos.ddpg import DdpgConfig
from grasplab.algos.ppo import PpoConfig
from grasplab.algos.trpo import TrpoConfig
from grasplab.curriculum import Z_BAND, build_schedule
from grasplab.env import EnvConfig, WorkspaceBounds
from grasplab.errors import ConfigError
from grasplab.reward import RewardConstants
from grasplab.scene import RandomizationRanges

ALGORITHMS = ("ppo", "trpo", "ddpg")

# One flat key per tunable.  The default value doubles as the type witness:
# overrides must parse to the same type (int accepted where float expected).
DEFAULTS: dict[str, Any] = {
    "preset": "",
    "algorithm": "ppo",
    "seed": 0,
    "total_steps": 100_000,
    "rollout_steps": 2048,
    "checkpoint_every": 50,
    "update_log_every": 1,
    "deterministic": True,
    "out_dir": "",
    # environment
    "env.obs_mode": "depth",
    "env.resolution": 32,
    "env.fov_x_deg": 60.0,
    "env.frame_grab": True,
    "env.max_steps": 10,
    "env.noise_sigma": 0.002,
    "env.quantize": True,
    "env.face_literal": False,
    "env.fixed_z": None,
    # workspace bounds
    "env.bounds.x_lo": -0.4,
    "env.bounds.x_hi": 0.4,
    "env.bounds.y_lo": 0.2,
    "env.bounds.y_hi": 1.0,
    "env.bounds.z_lo": 0.0,
    "env.bounds.z_hi": 0.4,
    # scene randomization
    "env.ranges.center_x": 0.0,
    "env.ranges.center_y": 0.6,
    "env.ranges.offset_xy": 0.1,
    "env.ranges.yaw_deg": 10.0,
    "env.ranges.dims_min_x": 0.04,
    "env.ranges.dims_min_y": 0.09,
    "env.ranges.dims_min_z": 0.03,
    "env.ranges.dims_max_x": 0.07,
    "env.ranges.dims_max_y": 0.14,
    "env.ranges.dims_max_z": 0.05,
    "env.ranges.n_blocks_lo": 1,
    "env.ranges.n_blocks_hi": 1,
    "env.ranges.shapes": "box,l_shape,u_shape",
    "env.ranges.wall_ratio": 0.3,
    "env.ranges.min_gap": 0.01,
    "env.ranges.camera_lo": 0.70,
    "env.ranges.camera_hi": 0.85,
    "env.ranges.near_lo": 0.3,
    "env.ranges.near_hi": 0.5,
    "env.ranges.far_lo": 1.8,
    "env.ranges.far_hi": 2.2,
    # reward constants
    "env.rewards.k1": 0.03,
    "env.rewards.k2": 0.01,
    "env.rewards.touch": 0.1,
    "env.rewards.collision": -0.1,
    "env.rewards.position": 0.5,
    "env.rewards.rotation": 0.5,
    # network
    "net.hidden": "",
    # curriculum
    "curriculum.enabled": True,
    "curriculum.start_xy": 0.10,
    "curriculum.final_xy": 0.01,
    "curriculum.start_yaw": 10.0,
    "curriculum.final_yaw": 2.0,
    "curriculum.start_threshold": -0.2,
    "curriculum.final_threshold": 1.0,
    "curriculum.n_lessons": 19,
    "curriculum.window": 100,
    "curriculum.fixed_xy_tol": 0.10,
    "curriculum.fixed_yaw_tol": 10.0,
    # algorithms
    "ppo.clip_eps": 0.2,
    "ppo.entropy_coef": 0.01,
    "ppo.value_coef": 0.5,
    "ppo.epochs": 3,
    "ppo.minibatch": 32,
    "ppo.gamma": 0.99,
    "ppo.lam": 0.95,
    "ppo.lr_initial": 3e-4,
    "ppo.lr_kind": "polynomial",
    "ppo.lr_power": 1.0,
    "trpo.delta": 0.01,
    "trpo.cg_iters": 10,
    "trpo.damping": 0.1,
    "trpo.backtrack_coef": 0.8,
    "trpo.backtrack_steps": 10,
    "trpo.gamma": 0.99,
    "trpo.lam": 0.95,
    "trpo.value_lr": 1e-2,
    "trpo.value_iters": 30,
    "ddpg.noise_std": 0.1,
    "ddpg.capacity": 100_000,
    "ddpg.batch": 64,
    "ddpg.tau": 0.005,
    "ddpg.actor_lr": 1e-3,
    "ddpg.critic_lr": 1e-3,
    "ddpg.gamma": 0.99,
    "ddpg.warmup": 1000,
    "ddpg.update_every": 1,
    # evaluation
    "eval.episodes": 100,
}

# Named presets mirroring the standard experiment grid: the reduced reach task
# on 32x32 depth, the vector goal-offset task for algorithm comparison, the
# full randomized task at each supported resolution, and ablation variants.
PRESETS: dict[str, dict[str, Any]] = {
    # Reduced reach task: one box of fixed size, fixed camera, 32x32 depth,
    # x/y/yaw actions with the height axis frozen just above the block top,
    # one decision per episode, fixed tolerances (no curriculum).
    "reach32": {
        "algorithm": "ppo",
        "total_steps": 300_000,
        "rollout_steps": 1024,
        "env.obs_mode": "depth",
        "env.resolution": 32,
        "env.max_steps": 1,
        "env.fixed_z": 0.055,
        # Geometry sized so the box spans >= 8 px at the block's depth: the
        # 32 px stack samples pixel pairs 8 px apart, so an 8 px footprint is
        # always seen by at least one conv cell in each axis.
        "env.fov_x_deg": 40.0,
        "env.bounds.x_lo": -0.2,
        "env.bounds.x_hi": 0.2,
        "env.bounds.y_lo": 0.4,
        "env.bounds.y_hi": 0.8,
        "env.ranges.shapes": "box",
        "env.ranges.offset_xy": 0.09,
        "env.ranges.dims_min_x": 0.08,
        "env.ranges.dims_min_y": 0.08,
        "env.ranges.dims_min_z": 0.04,
        "env.ranges.dims_max_x": 0.08,
        "env.ranges.dims_max_y": 0.08,
        "env.ranges.dims_max_z": 0.04,
        "env.ranges.camera_lo": 0.58,
        "env.ranges.camera_hi": 0.58,
        "env.ranges.near_lo": 0.4,
        "env.ranges.near_hi": 0.4,
        "env.ranges.far_lo": 2.0,
        "env.ranges.far_hi": 2.0,
        "curriculum.enabled": False,
        "curriculum.fixed_xy_tol": 0.05,
        "curriculum.fixed_yaw_tol": 10.0,
        "ppo.lr_initial": 1e-3,
        "ppo.epochs": 10,
        "ppo.minibatch": 64,
        "ppo.gamma": 0.9,
        "ppo.entropy_coef": 0.003,
    },
    # Vector variant whose observation is the goal offset from the tooltip;
    # used to compare the three optimizers on identical footing.
    "goal_offset": {
        "total_steps": 100_000,
        "rollout_steps": 2048,
        "env.obs_mode": "vector",
        "env.max_steps": 10,
        # z rides at the goal band's center (block tops are fixed by the z
        # dims), so the planar x/y/yaw problem is what the optimizers race on.
        "env.fixed_z": 0.055,
        "env.ranges.shapes": "box",
        "env.ranges.dims_min_z": 0.04,
        "env.ranges.dims_max_z": 0.04,
        "curriculum.enabled": False,
        "curriculum.fixed_xy_tol": 0.05,
        "curriculum.fixed_yaw_tol": 10.0,
        "ppo.lr_initial": 1e-3,
        "trpo.value_lr": 3e-2,
    },
    # Full randomized task with the staged tolerance schedule.
    "full32": {
        "algorithm": "ppo",
        "total_steps": 1_000_000,
        "env.obs_mode": "depth",
        "env.resolution": 32,
        "env.ranges.n_blocks_hi": 3,
        "curriculum.enabled": True,
    },
}


def _resolution_variant(base: str, resolution: int) -> dict[str, Any]:
    preset = dict(PRESETS[base])
    preset["env.resolution"] = resolution
    return preset


PRESETS["full80"] = _resolution_variant("full32", 80)
PRESETS["full128"] = _resolution_variant("full32", 128)
PRESETS["full256"] = _resolution_variant("full32", 256)
PRESETS["full32_rgb"] = {**PRESETS["full32"], "env.obs_mode": "depth_rgb"}
PRESETS["full32_live"] = {**PRESETS["full32"], "env.frame_grab": False}
PRESETS["full32_nocurriculum"] = {**PRESETS["full32"], "curriculum.enabled": False}
PRESETS["full32_trpo"] = {**PRESETS["full32"], "algorithm": "trpo"}
PRESETS["full32_ddpg"] = {**PRESETS["full32"], "algorithm": "ddpg"}


@dataclass
class RunConfig:
    """Fully resolved configuration for one training or evaluation run."""

    algorithm: str
    seed: int
    total_steps: int
    rollout_steps: int
    checkpoint_every: int
    update_log_every: int
    deterministic: bool
    out_dir: str
    env: EnvConfig
    hidden: tuple[int, ...]
    curriculum_enabled: bool
    curriculum_window: int
    schedule_args: dict[str, Any]
    fixed_xy_tol: float
    fixed_yaw_tol: float
    ppo: PpoConfig
    trpo: TrpoConfig
    ddpg: DdpgConfig
    eval_episodes: int
    flat: dict[str, Any] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if self.rollout_steps <= 0:
            raise ConfigError("rollout_steps must be positive")
        if self.checkpoint_every <= 0:
            raise ConfigError("checkpoint_every must be positive")
        if self.update_log_every <= 0:
            raise ConfigError("update_log_every must be positive")
        if self.eval_episodes < 0:
            raise ConfigError("eval.episodes must be >= 0")


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Check *value* against the type of *default*, allowing int -> float."""

    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected bool, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected int, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected float, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected string, got {value!r}")
        return value
    raise ConfigError(f"{key}: unsupported config type {type(default).__name__}")


def parse_override(text: str) -> tuple[str, Any]:
    """Split one ``key=value`` pair, parsing the value as YAML."""

    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    try:
        value = yaml.safe_load(raw) if raw != "" else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: unparseable value ({exc})") from exc
    return key.strip(), value


def merge_flat(
    config_path: str | None = None,
    overrides: tuple[str, ...] = (),
    extra: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    """Merge defaults, preset, file, and overrides into one flat dict."""

    layers: list[Mapping[str, Any]] = []
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as handle:
                loaded = yaml.safe_load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {config_path} is not valid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {config_path} must hold a mapping")
        layers.append(loaded)
    if extra:
        layers.append(dict(extra))
    override_layer: dict[str, Any] = {}
    for item in overrides:
        key, value = parse_override(item)
        override_layer[key] = value
    if override_layer:
        layers.append(override_layer)

    # Resolve the preset first so file/override keys still win over it.
    preset_name = ""
    for layer in layers:
        if "preset" in layer:
            preset_name = layer["preset"]
    if preset_name and preset_name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {preset_name!r} (known: {known})")

    merged = dict(DEFAULTS)
    if preset_name:
        merged.update(PRESETS[preset_name])
        merged["preset"] = preset_name
    for layer in layers:
        for key, value in layer.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value, DEFAULTS[key])
    return merged


def _parse_shapes(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    if not names:
        raise ConfigError("env.ranges.shapes must list at least one shape")
    return names


def _parse_hidden(text: str) -> tuple[int, ...] | None:
    if not text.strip():
        return None
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"net.hidden must be comma-separated ints: {text!r}") from exc


def build_run_config(flat: Mapping[str, Any]) -> RunConfig:
    """Materialize typed configs from a merged flat dictionary."""

    g = flat.__getitem__
    bounds = WorkspaceBounds(
        x=(g("env.bounds.x_lo"), g("env.bounds.x_hi")),
        y=(g("env.bounds.y_lo"), g("env.bounds.y_hi")),
        z=(g("env.bounds.z_lo"), g("env.bounds.z_hi")),
    )
    ranges = RandomizationRanges(
        center_xy=(g("env.ranges.center_x"), g("env.ranges.center_y")),
        offset_xy=g("env.ranges.offset_xy"),
        yaw_deg=g("env.ranges.yaw_deg"),
        dims_min=(
            g("env.ranges.dims_min_x"),
            g("env.ranges.dims_min_y"),
            g("env.ranges.dims_min_z"),
        ),
        dims_max=(
            g("env.ranges.dims_max_x"),
            g("env.ranges.dims_max_y"),
            g("env.ranges.dims_max_z"),
        ),
        n_blocks=(g("env.ranges.n_blocks_lo"), g("env.ranges.n_blocks_hi")),
        shapes=_parse_shapes(g("env.ranges.shapes")),
        wall_ratio=g("env.ranges.wall_ratio"),
        min_gap=g("env.ranges.min_gap"),
        camera_height=(g("env.ranges.camera_lo"), g("env.ranges.camera_hi")),
        near_clip=(g("env.ranges.near_lo"), g("env.ranges.near_hi")),
        far_clip=(g("env.ranges.far_lo"), g("env.ranges.far_hi")),
    )
    rewards = RewardConstants(
        k1=g("env.rewards.k1"),
        k2=g("env.rewards.k2"),
        touch=g("env.rewards.touch"),
        collision=g("env.rewards.collision"),
        position=g("env.rewards.position"),
        rotation=g("env.rewards.rotation"),
    )
    fixed_z = g("env.fixed_z")
    env = EnvConfig(
        obs_mode=g("env.obs_mode"),
        resolution=g("env.resolution"),
        fov_x_deg=g("env.fov_x_deg"),
        frame_grab=g("env.frame_grab"),
        max_steps=g("env.max_steps"),
        noise_sigma=g("env.noise_sigma"),
        quantize=g("env.quantize"),
        bounds=bounds,
        ranges=ranges,
        rewards=rewards,
        face_literal=g("env.face_literal"),
        fixed_z=None if fixed_z is None else float(fixed_z),
    )
    schedule_args = {
        "start_xy": g("curriculum.start_xy"),
        "final_xy": g("curriculum.final_xy"),
        "start_yaw": g("curriculum.start_yaw"),
        "final_yaw": g("curriculum.final_yaw"),
        "start_threshold": g("curriculum.start_threshold"),
        "final_threshold": g("curriculum.final_threshold"),
        "n_lessons": g("curriculum.n_lessons"),
        "z_range": Z_BAND,
    }
    # Validate the schedule eagerly so config errors surface before training.
    if flat["curriculum.enabled"]:
        build_schedule(**schedule_args)
    hidden = _parse_hidden(g("net.hidden"))
    if hidden is None:
        hidden = (64, 64) if env.obs_mode == "vector" else (256,)
    return RunConfig(
        algorithm=g("algorithm"),
        seed=g("seed"),
        total_steps=g("total_steps"),
        rollout_steps=g("rollout_steps"),
        checkpoint_every=g("checkpoint_every"),
        update_log_every=g("update_log_every"),
        deterministic=g("deterministic"),
        out_dir=g("out_dir"),
        env=env,
        hidden=hidden,
        curriculum_enabled=g("curriculum.enabled"),
        curriculum_window=g("curriculum.window"),
        schedule_args=schedule_args,
        fixed_xy_tol=g("curriculum.fixed_xy_tol"),
        fixed_yaw_tol=g("curriculum.fixed_yaw_tol"),
        ppo=PpoConfig(
            clip_eps=g("ppo.clip_eps"),
            entropy_coef=g("ppo.entropy_coef"),
            value_coef=g("ppo.value_coef"),
            epochs=g("ppo.epochs"),
            minibatch=g("ppo.minibatch"),
            gamma=g("ppo.gamma"),
            lam=g("ppo.lam"),
            lr_initial=g("ppo.lr_initial"),
            lr_kind=g("ppo.lr_kind"),
            lr_power=g("ppo.lr_power"),
        ),
        trpo=TrpoConfig(
            delta=g("trpo.delta"),
            cg_iters=g("trpo.cg_iters"),
            damping=g("trpo.damping"),
            backtrack_coef=g("trpo.backtrack_coef"),
            backtrack_steps=g("trpo.backtrack_steps"),
            gamma=g("trpo.gamma"),
            lam=g("trpo.lam"),
            value_lr=g("trpo.value_lr"),
            value_iters=g("trpo.value_iters"),
        ),
        ddpg=DdpgConfig(
            noise_std=g("ddpg.noise_std"),
            capacity=g("ddpg.capacity"),
            batch=g("ddpg.batch"),
            tau=g("ddpg.tau"),
            actor_lr=g("ddpg.actor_lr"),
            critic_lr=g("ddpg.critic_lr"),
            gamma=g("ddpg.gamma"),
            warmup=g("ddpg.warmup"),
            update_every=g("ddpg.update_every"),
        ),
        eval_episodes=g("eval.episodes"),
        flat=dict(flat),
    )


def load_config(
    config_path: str | None = None,
    overrides: tuple[str, ...] = (),
    extra: Mapping[str, Any] | None = None,
) -> RunConfig:
    """One-call path from files/overrides to a validated :class:`RunConfig`."""

    return build_run_config(merge_flat(config_path, overrides, extra))

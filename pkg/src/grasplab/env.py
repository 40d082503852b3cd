"""Episodic reach-and-align environment over sampled tabletop scenes.

Protocol: ``reset(seed, lesson)`` samples a fresh scene and returns the
first observation; ``step(action)`` teleports the tool to an absolute
pose, scores the new configuration, and reports done when the goal is met
or the horizon runs out. The scene never changes within an episode; only
the tool moves.

Actions are (ax, ay, az, ayaw), each in [-1, 1], mapped affinely onto the
workspace: x and y in meters, z as height of the tooltip above the
support top, yaw in degrees. With ``fixed_z`` set in the config the z
component is dropped and actions are (ax, ay, ayaw).

Observation modes and layouts (all float32):
  depth      (1, H, W): sensor-processed depth, 0 at 0.4 m, 1 at 2.0 m
  depth_rgb  (4, H, W): channel 0 the same depth, channels 1..3 linear
             RGB in [0, 1] from the co-located color camera
  vector     (4,): goal minus tooltip: dx, dy, dz in meters plus the
             symmetry-folded yaw error scaled by 1/180

With ``frame_grab`` on (the default), the observation captured at reset
is returned unchanged by every step, so an episode is solvable only from
its first frame. With it off, each step re-renders with the tool body in
view, which can occlude blocks. Vector observations always track the
current tool pose.

Every episode records (seed, tolerances, actions); feeding the record
back through ``replay_episode`` reproduces observations and rewards
bit-exactly on the same backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from grasplab.curriculum import Lesson, Z_BAND
from grasplab.errors import BadDims, ConfigError, EpisodeFinished
from grasplab.geom import Pose, Rotation, wrap_deg, yaw_error_deg
from grasplab.render import (
    CameraIntrinsics,
    TOOL_COLOR,
    process_depth,
    render_frame,
    shade_rgb,
)
from grasplab.reward import RewardBreakdown, RewardConstants, total_reward
from grasplab.scene import (
    SUPPORT_TOP_Z,
    ContactReport,
    EpisodeConfig,
    GoalSpec,
    RandomizationRanges,
    Scene,
    build_scene,
    classify_contacts,
    ee_axis,
    goal_region,
    in_goal,
    sample_episode,
    tool_from_pose,
)

OBS_MODES = ("depth", "depth_rgb", "vector")


@dataclass(frozen=True)
class WorkspaceBounds:
    """Per-axis action ranges; z is height above the support top."""

    x: tuple[float, float] = (-0.4, 0.4)
    y: tuple[float, float] = (0.2, 1.0)
    z: tuple[float, float] = (0.0, 0.4)
    yaw: tuple[float, float] = (-180.0, 180.0)

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "yaw"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"bounds.{name}: need low < high, got {lo}, {hi}")


@dataclass(frozen=True)
class EnvConfig:
    obs_mode: str = "depth"
    resolution: int = 32
    fov_x_deg: float = 60.0
    frame_grab: bool = True
    max_steps: int = 10
    noise_sigma: float = 0.002
    quantize: bool = True
    bounds: WorkspaceBounds = field(default_factory=WorkspaceBounds)
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)
    rewards: RewardConstants = field(default_factory=RewardConstants)
    face_literal: bool = False
    fixed_z: float | None = None  # height above support top; drops the z action

    def __post_init__(self) -> None:
        if self.obs_mode not in OBS_MODES:
            raise ConfigError(f"obs_mode must be one of {OBS_MODES}")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.resolution < 1:
            raise ConfigError("resolution must be positive")
        if self.fixed_z is not None and not (
            self.bounds.z[0] <= self.fixed_z <= self.bounds.z[1]
        ):
            raise ConfigError("fixed_z must lie inside the z bounds")

    @property
    def action_dim(self) -> int:
        return 3 if self.fixed_z is not None else 4

    @property
    def observation_shape(self) -> tuple[int, ...]:
        if self.obs_mode == "depth":
            return (1, self.resolution, self.resolution)
        if self.obs_mode == "depth_rgb":
            return (4, self.resolution, self.resolution)
        return (4,)


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: RewardBreakdown
    done: bool
    info: dict


@dataclass(frozen=True)
class ReplayRecord:
    """Everything needed to re-simulate one episode bit-exactly."""

    seed: int
    xy_tol: float
    z_range: tuple[float, float]
    yaw_tol: float
    actions: tuple[tuple[float, ...], ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "xy_tol": self.xy_tol,
                "z_range": list(self.z_range),
                "yaw_tol": self.yaw_tol,
                "actions": [list(a) for a in self.actions],
            },
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ReplayRecord":
        try:
            doc = json.loads(text)
            return ReplayRecord(
                seed=int(doc["seed"]),
                xy_tol=float(doc["xy_tol"]),
                z_range=(float(doc["z_range"][0]), float(doc["z_range"][1])),
                yaw_tol=float(doc["yaw_tol"]),
                actions=tuple(
                    tuple(float(v) for v in a) for a in doc["actions"]
                ),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad replay record: {exc}") from exc


def action_to_pose(action: np.ndarray, bounds: WorkspaceBounds) -> Pose:
    """Affine map from [-1, 1]^4 onto the workspace; absolute, not a delta.

    Returns the world tool pose: position is the tooltip, with the z
    component offset above the support top; yaw is applied about world z.
    """
    a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    if a.shape != (4,):
        raise BadDims(f"action must have 4 components, got shape {a.shape}")

    def lerp(v: float, lo: float, hi: float) -> float:
        return lo + (v + 1.0) * 0.5 * (hi - lo)

    x = lerp(a[0], *bounds.x)
    y = lerp(a[1], *bounds.y)
    z = SUPPORT_TOP_Z + lerp(a[2], *bounds.z)
    yaw = lerp(a[3], *bounds.yaw)
    return Pose(np.array([x, y, z]), Rotation.from_yaw_deg(yaw))


def pose_to_action(
    xy: np.ndarray, z_height: float, yaw_deg: float, bounds: WorkspaceBounds
) -> np.ndarray:
    """Inverse of action_to_pose on each axis, clipped into [-1, 1]."""

    def unlerp(v: float, lo: float, hi: float) -> float:
        return 2.0 * (v - lo) / (hi - lo) - 1.0

    a = np.array(
        [
            unlerp(float(xy[0]), *bounds.x),
            unlerp(float(xy[1]), *bounds.y),
            unlerp(z_height, *bounds.z),
            unlerp(yaw_deg, *bounds.yaw),
        ]
    )
    return np.clip(a, -1.0, 1.0)


_HOME_ACTION = np.array([0.0, 0.0, 1.0, 0.0])


class GraspEnv:
    """Single-owner environment instance; see the module docstring."""

    def __init__(self, config: EnvConfig | None = None) -> None:
        self.config = config or EnvConfig()
        self.intrinsics = CameraIntrinsics.from_fov(
            self.config.resolution, self.config.resolution, self.config.fov_x_deg
        )
        self._scene: Scene | None = None
        self._goal: GoalSpec | None = None
        self._lesson: Lesson | None = None
        self._noise_rng: np.random.Generator | None = None
        self._tool_pose: Pose | None = None
        self._reset_obs: np.ndarray | None = None
        self._t = 0
        self._done = True
        self._actions: list[tuple[float, ...]] = []
        self._seed = 0

    # -- episode lifecycle ---------------------------------------------------

    def reset(
        self, seed: int, lesson: Lesson | None = None
    ) -> tuple[np.ndarray, EpisodeConfig]:
        """Sample a new episode; the tool starts at the home pose.

        The placement stream and the sensor-noise stream are both derived
        from the episode seed, so identical (seed, lesson, config) gives a
        bit-identical episode.
        """
        if lesson is None:
            lesson = Lesson(1, 0.10, Z_BAND, 10.0, -0.2)
        cfg = sample_episode(seed, self.config.ranges)
        self._scene = build_scene(cfg)
        self._goal = goal_region(self._scene)
        self._lesson = lesson
        self._noise_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(1,))
        )
        self._tool_pose = action_to_pose(_HOME_ACTION, self.config.bounds)
        self._t = 0
        self._done = False
        self._actions = []
        self._seed = seed
        self._reset_obs = self._observe(include_tool=False)
        return self._reset_obs.copy(), cfg

    def step(self, action: np.ndarray) -> StepResult:
        """Teleport the tool, score the configuration, advance the clock."""
        if self._done or self._scene is None:
            raise EpisodeFinished("call reset before stepping")
        a = self._full_action(action)
        pose = action_to_pose(a, self.config.bounds)
        prev = self._tool_pose.position
        self._tool_pose = pose
        self._t += 1
        self._actions.append(tuple(float(v) for v in np.asarray(action, dtype=np.float64)))

        contacts = classify_contacts(self._scene, tool_from_pose(pose))
        lesson = self._lesson
        pos_ok, rot_ok = in_goal(
            pose, self._goal, lesson.xy_tol, lesson.z_range, lesson.yaw_tol
        )
        block = self._scene.blocks[self._scene.target]
        breakdown = total_reward(
            contacts,
            pos_ok,
            rot_ok,
            prev_pos=prev,
            cur_pos=pose.position,
            target=self._goal_point(),
            z_ee=ee_axis(pose),
            z_block=block.pose.rotation.apply(np.array([0.0, 0.0, 1.0])),
            c=self.config.rewards,
            face_literal=self.config.face_literal,
        )
        success = pos_ok and rot_ok
        self._done = success or self._t >= self.config.max_steps
        obs = self._observe(include_tool=True)
        info = {
            "success": success,
            "contacts": contacts,
            "step_index": self._t,
            "pos_ok": pos_ok,
            "rot_ok": rot_ok,
        }
        return StepResult(obs, breakdown, self._done, info)

    # -- helpers ---------------------------------------------------------------

    @property
    def scene(self) -> Scene:
        if self._scene is None:
            raise EpisodeFinished("no active episode")
        return self._scene

    @property
    def goal(self) -> GoalSpec:
        if self._goal is None:
            raise EpisodeFinished("no active episode")
        return self._goal

    @property
    def tool_pose(self) -> Pose:
        return self._tool_pose

    def _goal_point(self) -> np.ndarray:
        g = self._goal
        z = g.top_z + 0.5 * (self._lesson.z_range[0] + self._lesson.z_range[1])
        return np.array([g.center_xy[0], g.center_xy[1], z])

    def _full_action(self, action: np.ndarray) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if self.config.fixed_z is None:
            if a.shape != (4,):
                raise BadDims(f"expected 4 action components, got {a.shape}")
            return a
        if a.shape != (3,):
            raise BadDims(f"expected 3 action components (z fixed), got {a.shape}")
        lo, hi = self.config.bounds.z
        az = 2.0 * (self.config.fixed_z - lo) / (hi - lo) - 1.0
        return np.array([a[0], a[1], az, a[2]])

    def oracle_action(self) -> np.ndarray:
        """The cheating action that lands exactly on the goal."""
        g = self.goal
        z_height = (
            self.config.fixed_z
            if self.config.fixed_z is not None
            else g.top_z + 0.5 * (self._lesson.z_range[0] + self._lesson.z_range[1]) - SUPPORT_TOP_Z
        )
        a = pose_to_action(g.center_xy, z_height, wrap_deg(g.yaw_deg), self.config.bounds)
        if self.config.fixed_z is not None:
            return np.array([a[0], a[1], a[3]])
        return a

    def episode_record(self) -> ReplayRecord:
        """Snapshot of the episode so far, sufficient for exact replay."""
        lesson = self._lesson
        return ReplayRecord(
            seed=self._seed,
            xy_tol=lesson.xy_tol,
            z_range=lesson.z_range,
            yaw_tol=lesson.yaw_tol,
            actions=tuple(self._actions),
        )

    # -- observation -------------------------------------------------------

    def _observe(self, include_tool: bool) -> np.ndarray:
        if self.config.obs_mode == "vector":
            return self._vector_obs()
        if self.config.frame_grab and include_tool:
            return self._reset_obs.copy()
        return self._render_obs(include_tool)

    def _vector_obs(self) -> np.ndarray:
        g = self._goal
        tip = self._tool_pose.position
        target = self._goal_point()
        err = yaw_error_deg(
            g.yaw_deg, self._tool_pose.rotation.yaw_deg(), g.symmetry
        )
        return np.array(
            [
                target[0] - tip[0],
                target[1] - tip[1],
                target[2] - tip[2],
                err / 180.0,
            ],
            dtype=np.float32,
        )

    def _render_obs(self, include_tool: bool) -> np.ndarray:
        scene = self._scene
        obbs, colors = scene.render_obbs()
        if include_tool and not self.config.frame_grab:
            for part in tool_from_pose(self._tool_pose):
                obbs.append(part)
                colors = np.vstack([colors, TOOL_COLOR[None, :]])
        frame = render_frame(obbs, scene.camera, self.intrinsics, scene.near, scene.far)
        depth = process_depth(
            frame.depth,
            self._noise_rng,
            noise_sigma=self.config.noise_sigma,
            quantize=self.config.quantize,
        )
        if self.config.obs_mode == "depth":
            return depth[None, :, :]
        rgb = shade_rgb(frame, colors).astype(np.float32)
        return np.concatenate([depth[None, :, :], rgb.transpose(2, 0, 1)], axis=0)


def replay_episode(env: GraspEnv, record: ReplayRecord) -> list[StepResult]:
    """Re-run a recorded episode; bit-exact on a matching config/backend."""
    lesson = Lesson(
        index=1,
        xy_tol=record.xy_tol,
        z_range=record.z_range,
        yaw_tol=record.yaw_tol,
        advance_threshold=0.0,
    )
    env.reset(record.seed, lesson)
    return [env.step(np.asarray(a)) for a in record.actions]

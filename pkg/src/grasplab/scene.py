"""Tabletop scene sampling, tool geometry, goal regions, contact checks.

A scene is a rigid support slab carrying one to a few extruded blocks
(solid, L, or U silhouettes) plus an overhead camera. Episodes are sampled
from explicit randomization ranges through a seeded generator, captured as
a plain-data EpisodeConfig that serializes to JSON, and only then expanded
into world-space boxes. The same config always rebuilds the same scene.

The tool is a parallel-jaw head idealized as a single box on a slender
shaft. Its pose names the tooltip (bottom face center); at identity
orientation the tool hangs straight down, approach axis (0, 0, -1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from grasplab.errors import BadDims, ConfigError, PlacementFailure
from grasplab.geom import (
    Obb,
    Pose,
    Rotation,
    ShapeModel,
    compose_shape,
    obb_overlap_pairs,
    shape_centroid,
    yaw_error_deg,
)
from grasplab.render import SUPPORT_COLOR, BLOCK_PALETTE, overhead_pose

# Support slab: 0.8 x 0.6 footprint, top face at z = 0.1.
SUPPORT_HALF = np.array([0.4, 0.3, 0.05])
SUPPORT_CENTER = np.array([0.0, 0.6, 0.05])
SUPPORT_TOP_Z = float(SUPPORT_CENTER[2] + SUPPORT_HALF[2])

# Tool: head with a 0.03 m square face, 0.05 m tall, on a 0.5 m shaft.
TOOL_HEAD_HALF = np.array([0.015, 0.015, 0.025])
TOOL_SHAFT_HALF = np.array([0.006, 0.006, 0.25])

MAX_PLACEMENT_ATTEMPTS = 100


@dataclass(frozen=True)
class RandomizationRanges:
    """Uniform sampling ranges for episode generation.

    Block centroids land inside a square of half-width ``offset_xy`` around
    ``center_xy``; yaw is uniform in +-``yaw_deg``. Camera height and the
    renderer clip planes vary per episode while the depth quantizer range
    stays fixed.
    """

    center_xy: tuple[float, float] = (0.0, 0.6)
    offset_xy: float = 0.1
    yaw_deg: float = 10.0
    dims_min: tuple[float, float, float] = (0.04, 0.09, 0.03)
    dims_max: tuple[float, float, float] = (0.07, 0.14, 0.05)
    n_blocks: tuple[int, int] = (1, 1)
    shapes: tuple[str, ...] = ("box", "l_shape", "u_shape")
    wall_ratio: float = 0.3
    min_gap: float = 0.01
    camera_height: tuple[float, float] = (0.70, 0.85)
    near_clip: tuple[float, float] = (0.3, 0.5)
    far_clip: tuple[float, float] = (1.8, 2.2)

    def __post_init__(self) -> None:
        if self.offset_xy < 0.0 or self.yaw_deg < 0.0:
            raise ConfigError("offset_xy and yaw_deg must be >= 0")
        lo, hi = self.n_blocks
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad n_blocks range {self.n_blocks}")
        if not self.shapes:
            raise ConfigError("need at least one allowed shape")
        for s in self.shapes:
            ShapeModel(s)  # raises ValueError on unknown names
        if any(a > b for a, b in zip(self.dims_min, self.dims_max)):
            raise ConfigError("dims_min must not exceed dims_max")


@dataclass(frozen=True)
class BlockSpec:
    """One sampled block: silhouette, bounding extents, planar pose."""

    model: str
    dims: tuple[float, float, float]
    x: float
    y: float
    yaw_deg: float
    wall_ratio: float = 0.3


@dataclass(frozen=True)
class EpisodeConfig:
    """Plain-data description of one episode; JSON round-trippable."""

    seed: int
    blocks: tuple[BlockSpec, ...]
    target: int
    camera_height: float
    near: float
    far: float

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "target": self.target,
            "camera_height": self.camera_height,
            "near": self.near,
            "far": self.far,
            "blocks": [
                {
                    "model": b.model,
                    "dims": list(b.dims),
                    "x": b.x,
                    "y": b.y,
                    "yaw_deg": b.yaw_deg,
                    "wall_ratio": b.wall_ratio,
                }
                for b in self.blocks
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "EpisodeConfig":
        try:
            doc = json.loads(text)
            blocks = tuple(
                BlockSpec(
                    model=str(b["model"]),
                    dims=tuple(float(v) for v in b["dims"]),
                    x=float(b["x"]),
                    y=float(b["y"]),
                    yaw_deg=float(b["yaw_deg"]),
                    wall_ratio=float(b.get("wall_ratio", 0.3)),
                )
                for b in doc["blocks"]
            )
            cfg = EpisodeConfig(
                seed=int(doc["seed"]),
                blocks=blocks,
                target=int(doc["target"]),
                camera_height=float(doc["camera_height"]),
                near=float(doc["near"]),
                far=float(doc["far"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad episode config: {exc}") from exc
        if not 0 <= cfg.target < len(cfg.blocks):
            raise ConfigError("target index out of range")
        return cfg


@dataclass(frozen=True)
class Block:
    """A block expanded to world space."""

    model: ShapeModel
    dims: np.ndarray
    wall_ratio: float
    pose: Pose
    parts: tuple[Obb, ...]
    color_id: int

    @property
    def top_z(self) -> float:
        return float(self.pose.position[2] + self.dims[2] / 2.0)

    def centroid_xy(self) -> np.ndarray:
        local = shape_centroid(self.model, self.dims, self.wall_ratio)
        return self.pose.transform_point(local)[:2]


@dataclass(frozen=True)
class GoalSpec:
    """Where the tooltip should end up, and at what heading."""

    center_xy: np.ndarray
    top_z: float
    yaw_deg: float
    symmetry: int


@dataclass(frozen=True)
class Scene:
    support: Obb
    blocks: tuple[Block, ...]
    target: int
    camera: Pose
    near: float
    far: float
    config: EpisodeConfig

    def render_obbs(self) -> tuple[list[Obb], np.ndarray]:
        """All boxes to draw plus one albedo row per box, support first."""
        obbs = [self.support]
        colors = [SUPPORT_COLOR]
        for b in self.blocks:
            for p in b.parts:
                obbs.append(p)
                colors.append(BLOCK_PALETTE[b.color_id % len(BLOCK_PALETTE)])
        return obbs, np.stack(colors)


def _block_parts(spec: BlockSpec) -> tuple[Pose, tuple[Obb, ...]]:
    dims = np.asarray(spec.dims, dtype=np.float64)
    pose = Pose(
        np.array([spec.x, spec.y, SUPPORT_TOP_Z + dims[2] / 2.0]),
        Rotation.from_yaw_deg(spec.yaw_deg),
    )
    model = ShapeModel(spec.model)
    parts = tuple(
        p.transformed(pose) for p in compose_shape(model, dims, spec.wall_ratio)
    )
    return pose, parts


def build_scene(cfg: EpisodeConfig) -> Scene:
    """Expand an episode config into world geometry. Deterministic."""
    if not 0 <= cfg.target < len(cfg.blocks):
        raise ConfigError("target index out of range")
    blocks = []
    for i, spec in enumerate(cfg.blocks):
        pose, parts = _block_parts(spec)
        blocks.append(
            Block(
                model=ShapeModel(spec.model),
                dims=np.asarray(spec.dims, dtype=np.float64),
                wall_ratio=spec.wall_ratio,
                pose=pose,
                parts=parts,
                color_id=i,
            )
        )
    support = Obb(SUPPORT_CENTER.copy(), SUPPORT_HALF.copy())
    camera = overhead_pose(SUPPORT_CENTER[:2], cfg.camera_height)
    return Scene(
        support=support,
        blocks=tuple(blocks),
        target=cfg.target,
        camera=camera,
        near=cfg.near,
        far=cfg.far,
        config=cfg,
    )


def _footprint_on_support(parts: tuple[Obb, ...]) -> bool:
    xy_min = SUPPORT_CENTER[:2] - SUPPORT_HALF[:2]
    xy_max = SUPPORT_CENTER[:2] + SUPPORT_HALF[:2]
    for p in parts:
        c = p.corners()[:, :2]
        if np.any(c < xy_min) or np.any(c > xy_max):
            return False
    return True


def _parts_conflict(a: tuple[Obb, ...], b: tuple[Obb, ...], gap: float) -> bool:
    """True if any part of a comes within gap of any part of b."""
    grown = [Obb(p.center, p.half_extents + gap, p.rotation) for p in a]
    pairs_a = [ga for ga in grown for _ in b]
    pairs_b = [pb for _ in grown for pb in b]
    return bool(obb_overlap_pairs(pairs_a, pairs_b).any())


def sample_episode(
    seed: int, ranges: RandomizationRanges | None = None
) -> EpisodeConfig:
    """Draw one episode from the ranges using a dedicated seeded stream.

    Blocks are placed by rejection sampling: a candidate pose is discarded
    when the block would overhang the support or come within ``min_gap``
    of an earlier block. More than MAX_PLACEMENT_ATTEMPTS rejections for
    any single block raise PlacementFailure.
    """
    r = ranges or RandomizationRanges()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = int(rng.integers(r.n_blocks[0], r.n_blocks[1] + 1))
    cx, cy = r.center_xy
    dmin = np.asarray(r.dims_min)
    dmax = np.asarray(r.dims_max)

    specs: list[BlockSpec] = []
    placed_parts: list[tuple[Obb, ...]] = []
    for _ in range(n):
        for attempt in range(MAX_PLACEMENT_ATTEMPTS + 1):
            if attempt == MAX_PLACEMENT_ATTEMPTS:
                raise PlacementFailure(
                    f"no valid pose for block {len(specs)} after "
                    f"{MAX_PLACEMENT_ATTEMPTS} attempts"
                )
            model = str(rng.choice(np.asarray(r.shapes, dtype=object)))
            dims = rng.uniform(dmin, dmax)
            x = cx + rng.uniform(-r.offset_xy, r.offset_xy)
            y = cy + rng.uniform(-r.offset_xy, r.offset_xy)
            yaw = rng.uniform(-r.yaw_deg, r.yaw_deg)
            cand = BlockSpec(
                model=model,
                dims=tuple(float(v) for v in dims),
                x=float(x),
                y=float(y),
                yaw_deg=float(yaw),
                wall_ratio=r.wall_ratio,
            )
            _, parts = _block_parts(cand)
            if not _footprint_on_support(parts):
                continue
            if any(_parts_conflict(parts, prev, r.min_gap) for prev in placed_parts):
                continue
            specs.append(cand)
            placed_parts.append(parts)
            break

    target = int(rng.integers(len(specs)))
    return EpisodeConfig(
        seed=seed,
        blocks=tuple(specs),
        target=target,
        camera_height=float(rng.uniform(*r.camera_height)),
        near=float(rng.uniform(*r.near_clip)),
        far=float(rng.uniform(*r.far_clip)),
    )


def goal_region(scene: Scene) -> GoalSpec:
    """Target block's centroid in the plane, its top face height, its heading."""
    b = scene.blocks[scene.target]
    return GoalSpec(
        center_xy=b.centroid_xy(),
        top_z=b.top_z,
        yaw_deg=b.pose.rotation.yaw_deg(),
        symmetry=b.model.yaw_symmetry,
    )


def tool_from_pose(pose: Pose) -> tuple[Obb, Obb]:
    """Head and shaft boxes for a tool whose tooltip sits at pose.position."""
    head_c = pose.transform_point(np.array([0.0, 0.0, TOOL_HEAD_HALF[2]]))
    shaft_c = pose.transform_point(
        np.array([0.0, 0.0, 2.0 * TOOL_HEAD_HALF[2] + TOOL_SHAFT_HALF[2]])
    )
    return (
        Obb(head_c, TOOL_HEAD_HALF.copy(), pose.rotation),
        Obb(shaft_c, TOOL_SHAFT_HALF.copy(), pose.rotation),
    )


def ee_axis(pose: Pose) -> np.ndarray:
    """Approach direction of the tool: local -z mapped to the world."""
    return pose.rotation.apply(np.array([0.0, 0.0, -1.0]))


def in_goal(
    tool_pose: Pose,
    goal: GoalSpec,
    xy_tol: float,
    z_range: tuple[float, float],
    yaw_tol: float,
) -> tuple[bool, bool]:
    """Position and heading checks for the tooltip against a goal region.

    Position holds when both planar offsets are within xy_tol per axis and
    the tooltip floats between z_range[0] and z_range[1] above the block
    top. Heading holds when the yaw error, folded by the block's symmetry,
    is within yaw_tol. The two checks are independent here; reward logic
    decides how they combine.
    """
    dx = float(tool_pose.position[0] - goal.center_xy[0])
    dy = float(tool_pose.position[1] - goal.center_xy[1])
    dz = float(tool_pose.position[2]) - goal.top_z
    pos_ok = (
        abs(dx) <= xy_tol
        and abs(dy) <= xy_tol
        and z_range[0] <= dz <= z_range[1]
    )
    err = yaw_error_deg(tool_pose.rotation.yaw_deg(), goal.yaw_deg, goal.symmetry)
    rot_ok = abs(err) <= yaw_tol
    return pos_ok, rot_ok


@dataclass(frozen=True)
class ContactReport:
    """What the tool is pressing against at one instant."""

    touching_target: bool
    collision_count: int  # non-target blocks contacted, plus the support


def classify_contacts(scene: Scene, tool_parts: tuple[Obb, ...]) -> ContactReport:
    """Overlap-test the tool against every block and the support.

    Face touching counts as contact. The target block contributes the
    touch flag; every other contacted block and the support each add one
    collision.
    """
    pairs_a: list[Obb] = []
    pairs_b: list[Obb] = []
    owners: list[int] = []
    for bi, block in enumerate(scene.blocks):
        for part in block.parts:
            for tp in tool_parts:
                pairs_a.append(part)
                pairs_b.append(tp)
                owners.append(bi)
    for tp in tool_parts:
        pairs_a.append(scene.support)
        pairs_b.append(tp)
        owners.append(-1)
    hits = obb_overlap_pairs(pairs_a, pairs_b)
    touched: set[int] = {owners[i] for i in np.flatnonzero(hits)}
    touching_target = scene.target in touched
    collisions = sum(1 for t in touched if t != scene.target)
    return ContactReport(touching_target=touching_target, collision_count=collisions)

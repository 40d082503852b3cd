"""Rigid-body primitives: quaternion rotations, poses, oriented boxes.

Conventions used across the package: right-handed frames, z up, lengths in
meters, angles in degrees at API boundaries. A yaw of 0 leaves the world
axes unchanged and positive yaw turns +x toward +y (counterclockwise seen
from above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from grasplab import accel
from grasplab.errors import BadDims, ZeroLength

_NORM_EPS = 1e-12


def wrap_deg(angle: float) -> float:
    """Wrap an angle in degrees into the half-open interval (-180, 180]."""
    w = (angle + 180.0) % 360.0 - 180.0
    if w == -180.0:
        w = 180.0
    return w


def yaw_error_deg(a: float, b: float, symmetry: int = 1) -> float:
    """Signed smallest rotation from b to a modulo the shape's symmetry.

    ``symmetry`` is the order of the rotational symmetry about z: 1 for an
    asymmetric shape (full 360 range), 2 for a cuboid whose 180-degree flip
    is indistinguishable.
    """
    period = 360.0 / symmetry
    half = period / 2.0
    e = (a - b + half) % period - half
    if e == -half:
        e = half
    return e


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion (w, x, y, z); composition applies the right factor first."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_yaw_deg(yaw: float) -> "Rotation":
        h = math.radians(yaw) / 2.0
        return Rotation(math.cos(h), 0.0, 0.0, math.sin(h))

    @staticmethod
    def from_axis_angle(axis: np.ndarray, angle_deg: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64)
        n = float(np.linalg.norm(axis))
        if n < _NORM_EPS:
            raise ZeroLength("rotation axis has zero length")
        h = math.radians(angle_deg) / 2.0
        s = math.sin(h) / n
        return Rotation(math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s)

    def normalized(self) -> "Rotation":
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n < _NORM_EPS:
            raise ZeroLength("cannot normalize a zero quaternion")
        return Rotation(self.w / n, self.x / n, self.y / n, self.z / n)

    def compose(self, other: "Rotation") -> "Rotation":
        """Rotation equal to applying ``other`` first, then ``self``."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate one vector (3,) or a stack (N, 3)."""
        return np.asarray(v, dtype=np.float64) @ self.to_matrix().T

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def yaw_deg(self) -> float:
        """Heading about z; exact for rotations built from yaw alone."""
        s = 2.0 * (self.w * self.z + self.x * self.y)
        c = 1.0 - 2.0 * (self.y * self.y + self.z * self.z)
        return math.degrees(math.atan2(s, c))


@dataclass(frozen=True)
class Pose:
    """Position of a reference point plus the body orientation."""

    position: np.ndarray
    rotation: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self) -> None:
        p = np.asarray(self.position, dtype=np.float64)
        if p.shape != (3,):
            raise BadDims(f"pose position must be shape (3,), got {p.shape}")
        object.__setattr__(self, "position", p)

    def transform_point(self, local: np.ndarray) -> np.ndarray:
        return self.position + self.rotation.apply(local)


@dataclass(frozen=True)
class Obb:
    """Oriented box: world center, positive half extents, local->world rotation."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=np.float64)
        h = np.asarray(self.half_extents, dtype=np.float64)
        if c.shape != (3,) or h.shape != (3,):
            raise BadDims("obb center and half_extents must be shape (3,)")
        if not np.all(h > 0.0):
            raise BadDims(f"obb half extents must be positive, got {h}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)

    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    def corners(self) -> np.ndarray:
        """The 8 world-space corners, shape (8, 3)."""
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return self.center + (signs * self.half_extents) @ self.rotation.to_matrix().T

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        """Boolean per point (N, 3); slack expands each face outward."""
        local = (np.atleast_2d(points) - self.center) @ self.rotation.to_matrix()
        return np.all(np.abs(local) <= self.half_extents + slack, axis=1)

    def transformed(self, pose: Pose) -> "Obb":
        """This box re-expressed after rigidly moving its parent frame by pose."""
        return Obb(
            pose.transform_point(self.center),
            self.half_extents,
            pose.rotation.compose(self.rotation),
        )


class ShapeModel(str, Enum):
    """Block silhouettes: solid cuboid, L outline, U outline (z-extruded)."""

    BOX = "box"
    L_SHAPE = "l_shape"
    U_SHAPE = "u_shape"

    @property
    def yaw_symmetry(self) -> int:
        """Order of rotational symmetry about z, for yaw-error folding."""
        return 2 if self is ShapeModel.BOX else 1


def pack_obbs(obbs: list[Obb]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack boxes into (centers, half_extents, rotations) kernel arrays."""
    n = len(obbs)
    centers = np.empty((n, 3))
    half = np.empty((n, 3))
    rots = np.empty((n, 3, 3))
    for i, o in enumerate(obbs):
        centers[i] = o.center
        half[i] = o.half_extents
        rots[i] = o.rotation.to_matrix()
    return centers, half, rots


def obb_overlap(a: Obb, b: Obb) -> bool:
    """True iff the boxes intersect; exact face/edge touching counts."""
    ca, ha, ra = pack_obbs([a])
    cb, hb, rb = pack_obbs([b])
    return bool(accel.sat_overlap(ca, ha, ra, cb, hb, rb)[0])


def obb_overlap_pairs(pairs_a: list[Obb], pairs_b: list[Obb]) -> np.ndarray:
    """Vectorized overlap test for aligned lists of box pairs."""
    if len(pairs_a) != len(pairs_b):
        raise BadDims("pair lists must have equal length")
    if not pairs_a:
        return np.zeros(0, dtype=bool)
    ca, ha, ra = pack_obbs(pairs_a)
    cb, hb, rb = pack_obbs(pairs_b)
    return np.asarray(accel.sat_overlap(ca, ha, ra, cb, hb, rb), dtype=bool)


def ray_obb_intersect(
    origin: np.ndarray, direction: np.ndarray, obb: Obb
) -> tuple[float, np.ndarray] | None:
    """First intersection of a ray with one box.

    Returns (distance, outward world normal) or None on a miss. The
    direction need not be unit length; the distance is in units of it.
    A ray starting inside the box reports the exit face.
    """
    d = np.asarray(direction, dtype=np.float64)
    if float(np.linalg.norm(d)) < _NORM_EPS:
        raise ZeroLength("ray direction has zero length")
    c, h, r = pack_obbs([obb])
    t, idx, n = accel.cast_rays(
        np.asarray(origin, dtype=np.float64), d[None, :], c, h, r
    )
    if idx[0] < 0:
        return None
    return float(t[0]), n[0]


def compose_shape(
    model: ShapeModel, dims: np.ndarray, wall_ratio: float = 0.3
) -> list[Obb]:
    """Decompose a block silhouette into axis-aligned parts in its local frame.

    ``dims`` is the (dx, dy, dz) extent of the full bounding box, centered
    on the local origin. ``wall_ratio`` sets wall thickness as a fraction
    of the matching extent for the L and U outlines. Parts touch along
    shared faces but never overlap, so volumes add.
    """
    dims = np.asarray(dims, dtype=np.float64)
    if dims.shape != (3,) or not np.all(dims > 0.0):
        raise BadDims(f"shape dims must be 3 positive extents, got {dims}")
    if not 0.0 < wall_ratio <= 0.5:
        raise BadDims(f"wall_ratio must be in (0, 0.5], got {wall_ratio}")
    dx, dy, dz = dims
    if model is ShapeModel.BOX:
        return [Obb(np.zeros(3), dims / 2.0)]

    tx = wall_ratio * dx
    ty = wall_ratio * dy
    base = Obb(
        np.array([0.0, -dy / 2.0 + ty / 2.0, 0.0]),
        np.array([dx / 2.0, ty / 2.0, dz / 2.0]),
    )
    arm_half = np.array([tx / 2.0, (dy - ty) / 2.0, dz / 2.0])
    arm_y = ty / 2.0  # arms sit above the base, centered on the leftover span
    left = Obb(np.array([-dx / 2.0 + tx / 2.0, arm_y, 0.0]), arm_half)
    if model is ShapeModel.L_SHAPE:
        return [base, left]
    if model is ShapeModel.U_SHAPE:
        right = Obb(np.array([dx / 2.0 - tx / 2.0, arm_y, 0.0]), arm_half)
        return [base, left, right]
    raise BadDims(f"unknown shape model {model!r}")


def shape_centroid(
    model: ShapeModel, dims: np.ndarray, wall_ratio: float = 0.3
) -> np.ndarray:
    """Volume-weighted centroid of the composed shape, in its local frame."""
    parts = compose_shape(model, dims, wall_ratio)
    vols = np.array([p.volume() for p in parts])
    centers = np.stack([p.center for p in parts])
    return (vols @ centers) / vols.sum()


def shape_volume(
    model: ShapeModel, dims: np.ndarray, wall_ratio: float = 0.3
) -> float:
    """Total solid volume of the composed shape."""
    return float(sum(p.volume() for p in compose_shape(model, dims, wall_ratio)))

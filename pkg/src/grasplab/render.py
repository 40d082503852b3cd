"""Synthetic depth and RGB camera over oriented-box scenes.

The camera model is a pinhole with square pixels. Camera frame axes: +x
right, +y down the image, +z forward (the viewing direction). Pixel rays
are built with a unit forward component, so the ray parameter returned by
the caster is directly the z-depth in meters (distance along the optical
axis, not the slant range).

Depth post-processing mirrors a small structured-light sensor: additive
Gaussian noise, clamping to the sensor's working range, and 8-bit
quantization. Quantized values map back to meters as

    value = min_depth + code * (max_depth - min_depth) / 255

so a full quantize/restore round trip loses at most half a code width.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from grasplab import accel
from grasplab.errors import BadDims, RangeError
from grasplab.geom import Obb, Pose, Rotation, pack_obbs

# Working range of the emulated depth sensor, meters.
DEPTH_MIN = 0.4
DEPTH_MAX = 2.0

# Default overhead-view palette: support surface first, then block colors.
SUPPORT_COLOR = np.array([0.45, 0.45, 0.48])
BLOCK_PALETTE = np.array(
    [
        [0.85, 0.25, 0.20],
        [0.20, 0.55, 0.85],
        [0.25, 0.75, 0.30],
        [0.90, 0.75, 0.20],
        [0.70, 0.35, 0.80],
        [0.90, 0.50, 0.15],
    ]
)
TOOL_COLOR = np.array([0.80, 0.80, 0.85])
LIGHT_DIR = np.array([0.3, -0.4, -0.866])  # direction light travels, normalized below
AMBIENT = 0.3


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels; principal point defaults to the center."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise BadDims("image dimensions must be positive")
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise BadDims("focal lengths must be positive")

    @staticmethod
    def from_fov(width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        """Square-pixel intrinsics from a horizontal field of view."""
        if not 0.0 < fov_x_deg < 180.0:
            raise RangeError(f"horizontal fov must be in (0, 180), got {fov_x_deg}")
        f = (width / 2.0) / math.tan(math.radians(fov_x_deg) / 2.0)
        return CameraIntrinsics(width, height, f, f, width / 2.0, height / 2.0)


def overhead_pose(center_xy: np.ndarray, height: float) -> Pose:
    """Camera straight above a point, looking down, image rows toward -y."""
    rot = Rotation(0.0, 1.0, 0.0, 0.0)  # 180 deg about x: +z camera -> -z world
    return Pose(np.array([center_xy[0], center_xy[1], height]), rot)


def pixel_rays(intr: CameraIntrinsics, camera: Pose) -> np.ndarray:
    """World-space ray directions per pixel, shape (H*W, 3), row-major.

    Directions have unit projection on the optical axis, so a ray
    parameter equals z-depth.
    """
    j = (np.arange(intr.width) + 0.5 - intr.cx) / intr.fx
    i = (np.arange(intr.height) + 0.5 - intr.cy) / intr.fy
    u, v = np.meshgrid(j, i)
    d_cam = np.stack([u, v, np.ones_like(u)], axis=-1).reshape(-1, 3)
    return d_cam @ camera.rotation.to_matrix().T


@dataclass
class Frame:
    """Raw render output before sensor effects."""

    depth: np.ndarray  # (H, W) z-depth, meters; misses hold far
    index: np.ndarray  # (H, W) int64 index of the hit box, -1 for none
    normal: np.ndarray  # (H, W, 3) outward world normal at the hit


def render_frame(
    obbs: list[Obb],
    camera: Pose,
    intr: CameraIntrinsics,
    near: float,
    far: float,
) -> Frame:
    """Cast one ray per pixel against every box and keep the nearest hit.

    Depth is clamped into [near, far]; pixels that hit nothing read far.
    """
    if not 0.0 < near < far:
        raise RangeError(f"need 0 < near < far, got near={near} far={far}")
    dirs = pixel_rays(intr, camera)
    centers, half, rots = pack_obbs(obbs)
    t, idx, n = accel.cast_rays(camera.position, dirs, centers, half, rots)
    shape = (intr.height, intr.width)
    depth = np.clip(np.where(idx >= 0, t, far), near, far).reshape(shape)
    return Frame(depth, idx.reshape(shape), n.reshape(shape + (3,)))


def shade_rgb(
    frame: Frame,
    colors: np.ndarray,
    light_dir: np.ndarray = LIGHT_DIR,
    ambient: float = AMBIENT,
) -> np.ndarray:
    """Lambertian shading of a frame, (H, W, 3) float in [0, 1].

    ``colors`` is an (n_boxes, 3) albedo row per rendered box, in the same
    order the boxes were passed to render_frame. Background stays black.
    """
    if colors.ndim != 2 or colors.shape[1] != 3:
        raise BadDims("colors must be (n, 3)")
    light = np.asarray(light_dir, dtype=np.float64)
    light = light / np.linalg.norm(light)
    hit = frame.index >= 0
    lam = np.maximum(0.0, -(frame.normal @ light))
    shade = ambient + (1.0 - ambient) * lam
    img = np.zeros(frame.index.shape + (3,))
    img[hit] = colors[frame.index[hit]] * shade[hit, None]
    return np.clip(img, 0.0, 1.0)


def add_noise(
    depth: np.ndarray, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Additive Gaussian depth noise; sigma in meters, 0 is a no-op copy."""
    if sigma < 0.0:
        raise RangeError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return depth.copy()
    return depth + rng.normal(0.0, sigma, size=depth.shape)


def quantize_depth(
    depth: np.ndarray, min_depth: float = DEPTH_MIN, max_depth: float = DEPTH_MAX
) -> np.ndarray:
    """Map depths in [min_depth, max_depth] to uint8 codes 0..255."""
    if min_depth >= max_depth:
        raise RangeError("min_depth must be below max_depth")
    d = np.asarray(depth)
    if np.any(d < min_depth) or np.any(d > max_depth):
        raise RangeError("depth outside the quantizer range; clamp first")
    scaled = (d - min_depth) * (255.0 / (max_depth - min_depth))
    return np.rint(scaled).astype(np.uint8)


def dequantize_depth(
    codes: np.ndarray, min_depth: float = DEPTH_MIN, max_depth: float = DEPTH_MAX
) -> np.ndarray:
    """Restore meters from uint8 codes: min + code * (max - min) / 255."""
    if min_depth >= max_depth:
        raise RangeError("min_depth must be below max_depth")
    return min_depth + codes.astype(np.float64) * ((max_depth - min_depth) / 255.0)


def process_depth(
    depth: np.ndarray,
    rng: np.random.Generator,
    noise_sigma: float = 0.002,
    quantize: bool = True,
    min_depth: float = DEPTH_MIN,
    max_depth: float = DEPTH_MAX,
) -> np.ndarray:
    """Full sensor pipeline: noise, range clamp, optional 8-bit round trip,
    then normalization to [0, 1] float32 (0 at min_depth, 1 at max_depth)."""
    d = add_noise(depth, noise_sigma, rng)
    d = np.clip(d, min_depth, max_depth)
    if quantize:
        d = dequantize_depth(quantize_depth(d, min_depth, max_depth), min_depth, max_depth)
    return ((d - min_depth) / (max_depth - min_depth)).astype(np.float32)


# ---------------------------------------------------------------------------
# Image files
# ---------------------------------------------------------------------------


def write_pgm(path: str, gray: np.ndarray) -> None:
    """8-bit binary PGM. Accepts uint8 directly or floats in [0, 1]."""
    if gray.ndim != 2:
        raise BadDims("pgm wants a 2d array")
    data = _to_u8(gray)
    with open(path, "wb") as f:
        f.write(f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode())
        f.write(data.tobytes())


def write_ppm(path: str, rgb: np.ndarray) -> None:
    """8-bit binary PPM. Accepts uint8 directly or floats in [0, 1]."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise BadDims("ppm wants an (H, W, 3) array")
    data = _to_u8(rgb)
    with open(path, "wb") as f:
        f.write(f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode())
        f.write(data.tobytes())


def _to_u8(a: np.ndarray) -> np.ndarray:
    if a.dtype == np.uint8:
        return np.ascontiguousarray(a)
    return np.rint(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_frame_sidecar(
    path: str,
    intr: CameraIntrinsics,
    camera: Pose,
    near: float,
    far: float,
    extra: dict | None = None,
) -> None:
    """JSON metadata next to an image dump: camera model plus depth range."""
    r = camera.rotation
    doc = {
        "intrinsics": asdict(intr),
        "camera_position": [float(v) for v in camera.position],
        "camera_quaternion_wxyz": [r.w, r.x, r.y, r.z],
        "near": near,
        "far": far,
        "depth_range": [DEPTH_MIN, DEPTH_MAX],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")

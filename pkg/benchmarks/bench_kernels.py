"""Timing comparison of the compiled and pure-numpy kernel implementations.

Runs each hot kernel (ray casting, box-overlap batches, convolution forward
and backward) through both backends on identical inputs, checks that the
outputs agree, and prints a small table of per-call times and speedups.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from grasplab import accel
from grasplab.geom import Obb, Rotation, pack_obbs
from grasplab.render import CameraIntrinsics, overhead_pose, pixel_rays


def _random_boxes(rng: np.random.Generator, n: int) -> list[Obb]:
    boxes = []
    for _ in range(n):
        center = rng.uniform(-0.3, 0.3, 3) + np.array([0.0, 0.6, 0.2])
        half = rng.uniform(0.02, 0.08, 3)
        axis = rng.normal(size=3)
        angle = rng.uniform(0.0, 180.0)
        boxes.append(Obb(center, half, Rotation.from_axis_angle(axis, angle)))
    return boxes


def _time_call(fn, *args, repeats: int) -> float:
    fn(*args)  # warm any lazy compilation before timing
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if "numba" not in accel.IMPLEMENTATIONS:
        print("numba backend unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)

    # Ray casting: a 128x128 overhead view of a 12-box scene.
    boxes = _random_boxes(rng, 12)
    centers, halves, rotations = pack_obbs(boxes)
    intr = CameraIntrinsics.from_fov(128, 128, 60.0)
    camera = overhead_pose(np.array([0.0, 0.6]), 0.8)
    rays = pixel_rays(intr, camera)
    dirs = rays.reshape(-1, 3)
    ray_args = (camera.position, dirs, centers, halves, rotations)

    # Overlap batches: 4096 box pairs.
    a = _random_boxes(rng, 4096)
    b = _random_boxes(rng, 4096)
    ca, ha, ra = pack_obbs(a)
    cb, hb, rb = pack_obbs(b)
    sat_args = (ca, ha, ra, cb, hb, rb)

    # Convolution: the 32x32 preset's first layer on a 64-image batch.
    x = rng.standard_normal((64, 1, 32, 32)).astype(np.float32)
    w = rng.standard_normal((4, 1, 2, 2)).astype(np.float32)
    bias = np.zeros(4, dtype=np.float32)
    gy = rng.standard_normal((64, 4, 16, 16)).astype(np.float32)
    fwd_args = (x, w, bias, 2, 2)
    bwd_args = (x, w, gy, 2, 2)

    cases = [
        ("cast_rays", ray_args),
        ("sat_overlap", sat_args),
        ("conv2d_forward", fwd_args),
        ("conv2d_backward", bwd_args),
    ]

    print(f"{'kernel':<16} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, call_args in cases:
        impls = {
            backend: table[name] for backend, table in accel.IMPLEMENTATIONS.items()
        }
        ref = impls["numpy"](*call_args)
        jit = impls["numba"](*call_args)
        flat_ref = ref if isinstance(ref, tuple) else (ref,)
        flat_jit = jit if isinstance(jit, tuple) else (jit,)
        # Reduction order differs between the backends, so float32 results
        # agree to accumulation noise rather than exactly.
        for r, j in zip(flat_ref, flat_jit):
            np.testing.assert_allclose(r, j, rtol=1e-4, atol=1e-5)
        t_np = _time_call(impls["numpy"], *call_args, repeats=args.repeats)
        t_nb = _time_call(impls["numba"], *call_args, repeats=args.repeats)
        print(
            f"{name:<16} {t_np * 1e3:>12.3f} {t_nb * 1e3:>12.3f} {t_np / t_nb:>8.1f}x"
        )


if __name__ == "__main__":
    main()

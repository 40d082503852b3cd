"""Hot numeric kernels with twin implementations: numba @njit and pure numpy.

The inner loops that dominate runtime live here: per-pixel ray/box casting,
batched separating-axis overlap tests, and the conv2d forward/backward pair.
Every kernel exists twice with identical semantics; the active backend is
chosen once at import time from the ``GRASPLAB_NUMBA`` environment variable:

    GRASPLAB_NUMBA=1     require numba (ImportError if missing)
    GRASPLAB_NUMBA=0     force the pure-numpy path
    unset / "auto"       use numba when importable, else fall back

``benchmarks/bench_kernels.py`` times the two paths against each other.

Box conventions: ``rots[k]`` is the local->world rotation matrix of box k,
``half[k]`` its positive half extents, so a world point p lies inside box k
iff ``|rots[k].T @ (p - centers[k])| <= half[k]`` componentwise.
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

# Rays whose direction component is below this are treated as slab-parallel.
_PARALLEL_EPS = 1e-15
# SAT: |separation| below this counts as touching, i.e. overlapping.
SAT_TOUCH_MARGIN = 1e-9
# Cross-product axes shorter than this are degenerate and skipped.
_AXIS_EPS2 = 1e-12


def _resolve_backend() -> bool:
    flag = os.environ.get("GRASPLAB_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    if flag in ("1", "true", "on", "yes"):
        import numba  # noqa: F401  (hard requirement when forced)

        return True
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        log.warning("numba unavailable, falling back to pure-numpy kernels")
        return False


# ---------------------------------------------------------------------------
# Ray casting
# ---------------------------------------------------------------------------


def _cast_rays_numpy(origin, dirs, centers, half, rots):
    """Nearest box hit per ray.

    Returns (t, index, normal): hit distance along each unit ray (inf on
    miss), index of the hit box (-1 on miss) and the outward world-space
    face normal at the hit. A ray starting inside a box returns the
    exit-face distance.
    """
    n_rays = dirs.shape[0]
    n_box = centers.shape[0]
    best_t = np.full(n_rays, np.inf)
    best_idx = np.full(n_rays, -1, dtype=np.int64)
    best_n = np.zeros((n_rays, 3))
    for b in range(n_box):
        rot = rots[b]
        o = rot.T @ (origin - centers[b])
        d = dirs @ rot  # row-wise R^T @ dir
        h = half[b]

        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (-h - o) * inv
            t2 = (h - o) * inv
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        par = np.abs(d) < _PARALLEL_EPS
        inside_slab = np.abs(o) <= h
        lo = np.where(par, np.where(inside_slab, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside_slab, np.inf, -np.inf), hi)

        ax_near = np.argmax(lo, axis=1)
        ax_far = np.argmin(hi, axis=1)
        tmin = np.take_along_axis(lo, ax_near[:, None], axis=1)[:, 0]
        tmax = np.take_along_axis(hi, ax_far[:, None], axis=1)[:, 0]

        hit = (tmax >= np.maximum(tmin, 0.0)) & (tmax >= 0.0)
        entering = tmin >= 0.0
        t = np.where(entering, tmin, tmax)
        axis = np.where(entering, ax_near, ax_far)
        d_axis = np.take_along_axis(d, axis[:, None], axis=1)[:, 0]
        sign = np.where(entering, -np.sign(d_axis), np.sign(d_axis))

        closer = hit & (t < best_t)
        best_t = np.where(closer, t, best_t)
        best_idx = np.where(closer, b, best_idx)
        if np.any(closer):
            n_world = sign[closer, None] * rot[:, axis[closer]].T
            best_n[closer] = n_world
    return best_t, best_idx, best_n


def _cast_rays_loops(origin, dirs, centers, half, rots):
    n_rays = dirs.shape[0]
    n_box = centers.shape[0]
    out_t = np.full(n_rays, np.inf)
    out_idx = np.full(n_rays, -1, dtype=np.int64)
    out_n = np.zeros((n_rays, 3))
    for p in range(n_rays):
        best_t = np.inf
        best_b = -1
        best_axis = 0
        best_sign = 0.0
        for b in range(n_box):
            wx = origin[0] - centers[b, 0]
            wy = origin[1] - centers[b, 1]
            wz = origin[2] - centers[b, 2]
            tmin = -np.inf
            tmax = np.inf
            ax_near = 0
            ax_far = 0
            miss = False
            for a in range(3):
                o = rots[b, 0, a] * wx + rots[b, 1, a] * wy + rots[b, 2, a] * wz
                d = (
                    rots[b, 0, a] * dirs[p, 0]
                    + rots[b, 1, a] * dirs[p, 1]
                    + rots[b, 2, a] * dirs[p, 2]
                )
                h = half[b, a]
                if abs(d) < _PARALLEL_EPS:
                    if abs(o) > h:
                        miss = True
                        break
                    continue
                inv = 1.0 / d
                t1 = (-h - o) * inv
                t2 = (h - o) * inv
                if t1 > t2:
                    t1, t2 = t2, t1
                if t1 > tmin:
                    tmin = t1
                    ax_near = a
                if t2 < tmax:
                    tmax = t2
                    ax_far = a
            if miss or tmax < 0.0 or tmax < tmin:
                continue
            if tmin >= 0.0:
                t = tmin
                axis = ax_near
                entering = True
            else:
                t = tmax
                axis = ax_far
                entering = False
            if t < best_t:
                d_axis = (
                    rots[b, 0, axis] * dirs[p, 0]
                    + rots[b, 1, axis] * dirs[p, 1]
                    + rots[b, 2, axis] * dirs[p, 2]
                )
                sgn = 1.0 if d_axis > 0.0 else -1.0
                best_t = t
                best_b = b
                best_axis = axis
                best_sign = -sgn if entering else sgn
        out_t[p] = best_t
        out_idx[p] = best_b
        if best_b >= 0:
            out_n[p, 0] = best_sign * rots[best_b, 0, best_axis]
            out_n[p, 1] = best_sign * rots[best_b, 1, best_axis]
            out_n[p, 2] = best_sign * rots[best_b, 2, best_axis]
    return out_t, out_idx, out_n


# ---------------------------------------------------------------------------
# Separating-axis overlap (batched pairs)
# ---------------------------------------------------------------------------


def _sat_overlap_numpy(ca, ha, ra, cb, hb, rb):
    """True per pair iff the oriented boxes intersect (touching counts)."""
    m = ca.shape[0]
    c = np.einsum("mji,mjk->mik", ra, rb)  # Ra^T @ Rb
    t = np.einsum("mji,mj->mi", ra, cb - ca)
    absc = np.abs(c)

    disjoint = np.zeros(m, dtype=bool)
    # face axes of A
    for i in range(3):
        sep = np.abs(t[:, i]) - (ha[:, i] + (hb * absc[:, i, :]).sum(axis=1))
        disjoint |= sep > SAT_TOUCH_MARGIN
    # face axes of B
    for j in range(3):
        dist = np.abs((t * c[:, :, j]).sum(axis=1))
        sep = dist - ((ha * absc[:, :, j]).sum(axis=1) + hb[:, j])
        disjoint |= sep > SAT_TOUCH_MARGIN
    # cross axes e_i x B_j
    for i in range(3):
        i1 = (i + 1) % 3
        i2 = (i + 2) % 3
        for j in range(3):
            j1 = (j + 1) % 3
            j2 = (j + 2) % 3
            len2 = 1.0 - c[:, i, j] ** 2
            valid = len2 > _AXIS_EPS2
            dist = np.abs(t[:, i2] * c[:, i1, j] - t[:, i1] * c[:, i2, j])
            radius = (
                ha[:, i1] * absc[:, i2, j]
                + ha[:, i2] * absc[:, i1, j]
                + hb[:, j1] * absc[:, i, j2]
                + hb[:, j2] * absc[:, i, j1]
            )
            with np.errstate(invalid="ignore"):
                sep = (dist - radius) / np.sqrt(np.maximum(len2, _AXIS_EPS2))
            disjoint |= valid & (sep > SAT_TOUCH_MARGIN)
    return ~disjoint


def _sat_overlap_loops(ca, ha, ra, cb, hb, rb):
    m = ca.shape[0]
    out = np.empty(m, dtype=np.bool_)
    c = np.empty((3, 3))
    t = np.empty(3)
    for k in range(m):
        for i in range(3):
            t[i] = 0.0
            for j in range(3):
                c[i, j] = (
                    ra[k, 0, i] * rb[k, 0, j]
                    + ra[k, 1, i] * rb[k, 1, j]
                    + ra[k, 2, i] * rb[k, 2, j]
                )
            for w in range(3):
                t[i] += ra[k, w, i] * (cb[k, w] - ca[k, w])
        disjoint = False
        for i in range(3):
            radius = ha[k, i]
            for j in range(3):
                radius += hb[k, j] * abs(c[i, j])
            if abs(t[i]) - radius > SAT_TOUCH_MARGIN:
                disjoint = True
                break
        if not disjoint:
            for j in range(3):
                dist = t[0] * c[0, j] + t[1] * c[1, j] + t[2] * c[2, j]
                radius = hb[k, j]
                for i in range(3):
                    radius += ha[k, i] * abs(c[i, j])
                if abs(dist) - radius > SAT_TOUCH_MARGIN:
                    disjoint = True
                    break
        if not disjoint:
            for i in range(3):
                i1 = (i + 1) % 3
                i2 = (i + 2) % 3
                for j in range(3):
                    j1 = (j + 1) % 3
                    j2 = (j + 2) % 3
                    len2 = 1.0 - c[i, j] * c[i, j]
                    if len2 <= _AXIS_EPS2:
                        continue
                    dist = abs(t[i2] * c[i1, j] - t[i1] * c[i2, j])
                    radius = (
                        ha[k, i1] * abs(c[i2, j])
                        + ha[k, i2] * abs(c[i1, j])
                        + hb[k, j1] * abs(c[i, j2])
                        + hb[k, j2] * abs(c[i, j1])
                    )
                    if (dist - radius) / np.sqrt(len2) > SAT_TOUCH_MARGIN:
                        disjoint = True
                        break
                if disjoint:
                    break
        out[k] = not disjoint
    return out


# ---------------------------------------------------------------------------
# conv2d forward/backward (valid padding, strided)
# ---------------------------------------------------------------------------


def _im2col(x, kh, kw, sh, sw):
    b, c, h, w = x.shape
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    s0, s1, s2, s3 = x.strides
    cols = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, ho, wo, kh, kw),
        strides=(s0, s1, s2 * sh, s3 * sw, s2, s3),
        writeable=False,
    )
    return cols, ho, wo


def _conv2d_forward_numpy(x, w, bias, sh, sw):
    """x (B,C,H,W) * w (F,C,kh,kw) + bias (F,) -> (B,F,Ho,Wo)."""
    f, _, kh, kw = w.shape
    cols, ho, wo = _im2col(x, kh, kw, sh, sw)
    y = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # (B,Ho,Wo,F)
    y += bias
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def _conv2d_backward_numpy(x, w, gy, sh, sw):
    """Gradients (gx, gw, gb) of y = conv2d(x, w, b) given gy (B,F,Ho,Wo)."""
    f, cin, kh, kw = w.shape
    cols, ho, wo = _im2col(x, kh, kw, sh, sw)
    gw = np.tensordot(gy, cols, axes=([0, 2, 3], [0, 2, 3]))  # (F,C,kh,kw)
    gb = gy.sum(axis=(0, 2, 3))
    gx = np.zeros_like(x)
    # scatter per kernel offset: each (u,v) contributes a strided block
    gyt = gy.transpose(0, 2, 3, 1)  # (B,Ho,Wo,F)
    for u in range(kh):
        for v in range(kw):
            patch = np.tensordot(gyt, w[:, :, u, v], axes=([3], [0]))  # (B,Ho,Wo,C)
            gx[:, :, u : u + sh * ho : sh, v : v + sw * wo : sw] += patch.transpose(
                0, 3, 1, 2
            )
    return gx, gw, gb


def _conv2d_forward_loops(x, w, bias, sh, sw):
    b, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho = (h - kh) // sh + 1
    wo = (wd - kw) // sw + 1
    y = np.empty((b, f, ho, wo), dtype=x.dtype)
    for n in range(b):
        for q in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = bias[q]
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += x[n, ch, i * sh + u, j * sw + v] * w[q, ch, u, v]
                    y[n, q, i, j] = acc
    return y


def _conv2d_backward_loops(x, w, gy, sh, sw):
    b, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho = gy.shape[2]
    wo = gy.shape[3]
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    gb = np.zeros(f, dtype=w.dtype)
    for n in range(b):
        for q in range(f):
            for i in range(ho):
                for j in range(wo):
                    g = gy[n, q, i, j]
                    gb[q] += g
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                gx[n, ch, i * sh + u, j * sw + v] += g * w[q, ch, u, v]
                                gw[q, ch, u, v] += g * x[n, ch, i * sh + u, j * sw + v]
    return gx, gw, gb


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------

NUMBA_ENABLED = _resolve_backend()

IMPLEMENTATIONS: dict[str, dict] = {
    "numpy": {
        "cast_rays": _cast_rays_numpy,
        "sat_overlap": _sat_overlap_numpy,
        "conv2d_forward": _conv2d_forward_numpy,
        "conv2d_backward": _conv2d_backward_numpy,
    }
}

if NUMBA_ENABLED:
    from numba import njit

    _jit = njit(cache=True)
    IMPLEMENTATIONS["numba"] = {
        "cast_rays": _jit(_cast_rays_loops),
        "sat_overlap": _jit(_sat_overlap_loops),
        "conv2d_forward": _jit(_conv2d_forward_loops),
        "conv2d_backward": _jit(_conv2d_backward_loops),
    }

BACKEND = "numba" if NUMBA_ENABLED else "numpy"
_active = IMPLEMENTATIONS[BACKEND]

cast_rays = _active["cast_rays"]
sat_overlap = _active["sat_overlap"]
conv2d_forward = _active["conv2d_forward"]
conv2d_backward = _active["conv2d_backward"]


def warmup() -> None:
    """Trigger JIT compilation on tiny inputs so later timings are clean."""
    origin = np.zeros(3)
    dirs = np.array([[0.0, 0.0, 1.0]])
    centers = np.array([[0.0, 0.0, 2.0]])
    half = np.array([[0.5, 0.5, 0.5]])
    rots = np.eye(3)[None]
    cast_rays(origin, dirs, centers, half, rots)
    sat_overlap(centers, half, rots, centers, half, rots)
    for dt in (np.float32, np.float64):
        x = np.zeros((1, 1, 3, 3), dtype=dt)
        w = np.zeros((1, 1, 2, 2), dtype=dt)
        b = np.zeros(1, dtype=dt)
        y = conv2d_forward(x, w, b, 1, 1)
        conv2d_backward(x, w, y, 1, 1)

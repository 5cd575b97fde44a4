"""Pure-numpy implementations of the per-pixel kernels.

These are the reference semantics for the numba versions in
``_kernels_numba``; both backends keep the same floating-point
evaluation order so results agree to rounding noise.
"""

from __future__ import annotations

import numpy as np


def warp_bilinear(img: np.ndarray, vx: np.ndarray, vy: np.ndarray, clamp: bool) -> np.ndarray:
    """Backward-warp ``img`` by the displacement field (vx, vy).

    out[y, x] = img(x + vx[y, x], y + vy[y, x]) with bilinear sampling.
    Reads outside the domain yield 0.0, or the nearest border pixel when
    ``clamp`` is set.
    """
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + vx
    sy = ys + vy
    if clamp:
        sx = np.clip(sx, 0.0, w - 1.0)
        sy = np.clip(sy, 0.0, h - 1.0)
        inside = None
    else:
        inside = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
        sx = np.clip(sx, 0.0, w - 1.0)
        sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    if inside is not None:
        out = np.where(inside, out, 0.0)
    return np.ascontiguousarray(out)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample ``img`` to (out_h, out_w) with pixel-center alignment."""
    h, w = img.shape
    scale_y = h / out_h
    scale_x = w / out_w
    ys = (np.arange(out_h) + 0.5) * scale_y - 0.5
    xs = (np.arange(out_w) + 0.5) * scale_x - 0.5
    sy = np.clip(ys, 0.0, h - 1.0)[:, None] + np.zeros((1, out_w))
    sx = np.clip(xs, 0.0, w - 1.0)[None, :] + np.zeros((out_h, 1))
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return np.ascontiguousarray(top * (1.0 - fy) + bot * fy)


def _neighbor_avg(u: np.ndarray) -> np.ndarray:
    """Weighted 8-neighbor average (edge-replicated), weights 1/6 and 1/12."""
    p = np.pad(u, 1, mode="edge")
    axial = (p[:-2, 1:-1] + p[2:, 1:-1]) + (p[1:-1, :-2] + p[1:-1, 2:])
    diag = (p[:-2, :-2] + p[:-2, 2:]) + (p[2:, :-2] + p[2:, 2:])
    return axial * (1.0 / 6.0) + diag * (1.0 / 12.0)


def hs_sweeps(
    ix: np.ndarray,
    iy: np.ndarray,
    t0: np.ndarray,
    denom: np.ndarray,
    u: np.ndarray,
    v: np.ndarray,
    iters: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Run ``iters`` Jacobi sweeps of the regularized flow update.

    Each sweep replaces (u, v) with the neighbor average corrected along
    the image gradient: b = (ix*ubar + iy*vbar + t0) / denom, then
    u <- ubar - ix*b, v <- vbar - iy*b.  Double-buffered, so the result
    matches a sequential sweep exactly regardless of traversal order.
    """
    u = u.copy()
    v = v.copy()
    for _ in range(iters):
        ubar = _neighbor_avg(u)
        vbar = _neighbor_avg(v)
        b = (ix * ubar + iy * vbar + t0) / denom
        u = ubar - ix * b
        v = vbar - iy * b
    return u, v


def fb_terms(
    fvx: np.ndarray,
    fvy: np.ndarray,
    bvx: np.ndarray,
    bvy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward-backward residual map.

    For each pixel x the forward flow sends it to x' = x + f(x); where x'
    lands inside the domain the backward flow is sampled bilinearly at x'
    and the residual |f(x) + b(x')| is recorded.  Returns (err, valid)
    where err is zero on invalid pixels.
    """
    h, w = fvx.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + fvx
    ty = ys + fvy
    valid = (tx >= 0.0) & (tx <= w - 1.0) & (ty >= 0.0) & (ty <= h - 1.0)
    sx = np.clip(tx, 0.0, w - 1.0)
    sy = np.clip(ty, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0

    def _sample(a: np.ndarray) -> np.ndarray:
        top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
        bot = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
        return top * (1.0 - fy) + bot * fy

    dx = fvx + _sample(bvx)
    dy = fvy + _sample(bvy)
    err = np.sqrt(dx * dx + dy * dy)
    err = np.where(valid, err, 0.0)
    return np.ascontiguousarray(err), valid

"""Numba implementations of the per-pixel kernels.

Raw pixel loops compiled with @njit.  The arithmetic mirrors
``_kernels_numpy`` term for term so the two backends agree to rounding
noise.  Sweeps and warps are double-buffered and write disjoint outputs,
so results are bit-identical for any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def warp_bilinear(img, vx, vy, clamp):
    h, w = img.shape
    out = np.empty((h, w), dtype=np.float64)
    for y in prange(h):
        for x in range(w):
            sx = x + vx[y, x]
            sy = y + vy[y, x]
            if not clamp:
                if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                    out[y, x] = 0.0
                    continue
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
    return out


@njit(cache=True)
def resize_bilinear(img, out_h, out_w):
    h, w = img.shape
    scale_y = h / out_h
    scale_x = w / out_w
    out = np.empty((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        sy = (oy + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        elif sy > h - 1.0:
            sy = h - 1.0
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for ox in range(out_w):
            sx = (ox + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[oy, ox] = top * (1.0 - fy) + bot * fy
    return out


@njit(parallel=True, cache=True)
def _sweep_once(ix, iy, t0, denom, u, v, un, vn):
    h, w = ix.shape
    for y in prange(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            axial = (u[ym, x] + u[yp, x]) + (u[y, xm] + u[y, xp])
            diag = (u[ym, xm] + u[ym, xp]) + (u[yp, xm] + u[yp, xp])
            ubar = axial * (1.0 / 6.0) + diag * (1.0 / 12.0)
            axial = (v[ym, x] + v[yp, x]) + (v[y, xm] + v[y, xp])
            diag = (v[ym, xm] + v[ym, xp]) + (v[yp, xm] + v[yp, xp])
            vbar = axial * (1.0 / 6.0) + diag * (1.0 / 12.0)
            b = (ix[y, x] * ubar + iy[y, x] * vbar + t0[y, x]) / denom[y, x]
            un[y, x] = ubar - ix[y, x] * b
            vn[y, x] = vbar - iy[y, x] * b


@njit(cache=True)
def hs_sweeps(ix, iy, t0, denom, u, v, iters):
    a_u = u.copy()
    a_v = v.copy()
    b_u = np.empty_like(a_u)
    b_v = np.empty_like(a_v)
    for _ in range(iters):
        _sweep_once(ix, iy, t0, denom, a_u, a_v, b_u, b_v)
        a_u, b_u = b_u, a_u
        a_v, b_v = b_v, a_v
    return a_u, a_v


@njit(parallel=True, cache=True)
def fb_terms(fvx, fvy, bvx, bvy):
    h, w = fvx.shape
    err = np.zeros((h, w), dtype=np.float64)
    valid = np.zeros((h, w), dtype=np.bool_)
    for y in prange(h):
        for x in range(w):
            tx = x + fvx[y, x]
            ty = y + fvy[y, x]
            if tx < 0.0 or tx > w - 1.0 or ty < 0.0 or ty > h - 1.0:
                continue
            x0 = int(np.floor(tx))
            y0 = int(np.floor(ty))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = tx - x0
            fy = ty - y0
            top = bvx[y0, x0] * (1.0 - fx) + bvx[y0, x1] * fx
            bot = bvx[y1, x0] * (1.0 - fx) + bvx[y1, x1] * fx
            sbx = top * (1.0 - fy) + bot * fy
            top = bvy[y0, x0] * (1.0 - fx) + bvy[y0, x1] * fx
            bot = bvy[y1, x0] * (1.0 - fx) + bvy[y1, x1] * fx
            sby = top * (1.0 - fy) + bot * fy
            dx = fvx[y, x] + sbx
            dy = fvy[y, x] + sby
            err[y, x] = np.sqrt(dx * dx + dy * dy)
            valid[y, x] = True
    return err, valid

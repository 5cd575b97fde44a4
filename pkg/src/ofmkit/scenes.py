"""Synthetic articulation scenes: disks, texture crops, affine resamplings.

Disk rendering integrates the exact disk/pixel overlap area (no
supersampling); antialiasing can be switched off for bit-exact set
arithmetic, in which case a pixel is foreground iff its center lies
strictly inside the circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .image import Image


def _strip_area(r: float, u: float) -> float:
    """Integral of the full chord 2*sqrt(r^2-v^2) from -r up to u (u clipped)."""
    u = min(max(u, -r), r)
    return u * np.sqrt(max(r * r - u * u, 0.0)) + r * r * np.arcsin(u / r)


def _quadrant_area(r: float, a: float, b: float) -> float:
    """Area of the disk of radius r at the origin cut to {u <= a, v <= b}."""
    if a <= -r or b <= -r:
        return 0.0
    if a >= r:
        if b >= r:
            return np.pi * r * r
        return _strip_area(r, b) + r * r * (np.pi / 2.0)
    if b >= r:
        return _strip_area(r, a) + r * r * (np.pi / 2.0)
    c = np.sqrt(max(r * r - b * b, 0.0))
    if b >= 0.0:
        if a <= -c:
            return _strip_area(r, a) + r * r * (np.pi / 2.0)
        full_left = _strip_area(r, -c) + r * r * (np.pi / 2.0)
        if a <= c:
            return full_left + b * (a + c) + 0.5 * (_strip_area(r, a) - _strip_area(r, -c))
        mid = b * 2.0 * c + 0.5 * (_strip_area(r, c) - _strip_area(r, -c))
        return full_left + mid + (_strip_area(r, a) - _strip_area(r, c))
    if a <= -c:
        return 0.0
    if a <= c:
        return b * (a + c) + 0.5 * (_strip_area(r, a) - _strip_area(r, -c))
    return b * 2.0 * c + 0.5 * (_strip_area(r, c) - _strip_area(r, -c))


def disk_coverage(width: int, height: int, cx: float, cy: float, radius: float) -> np.ndarray:
    """Per-pixel covered area fraction of the disk, exact for every pixel.

    Pixel (x, y) occupies [x-0.5, x+0.5] x [y-0.5, y+0.5]; the summed
    coverage of a fully contained disk equals pi*radius^2 to rounding.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dx = np.abs(xs - cx)
    dy = np.abs(ys - cy)
    near2 = np.maximum(dx - 0.5, 0.0) ** 2 + np.maximum(dy - 0.5, 0.0) ** 2
    far2 = (dx + 0.5) ** 2 + (dy + 0.5) ** 2
    out = np.zeros((height, width))
    out[far2 <= radius * radius] = 1.0
    edge = (near2 < radius * radius) & (far2 > radius * radius)
    for y, x in np.argwhere(edge):
        x0 = x - cx - 0.5
        x1 = x - cx + 0.5
        y0 = y - cy - 0.5
        y1 = y - cy + 0.5
        out[y, x] = (
            _quadrant_area(radius, x1, y1)
            - _quadrant_area(radius, x0, y1)
            - _quadrant_area(radius, x1, y0)
            + _quadrant_area(radius, x0, y0)
        )
    return out


def disk_image(
    width: int,
    height: int,
    cx: float,
    cy: float,
    radius: float,
    antialias: bool = True,
    fg: float = 1.0,
    bg: float = 0.0,
) -> Image:
    """Render a disk of intensity ``fg`` on a ``bg`` canvas."""
    if antialias:
        cov = disk_coverage(width, height, cx, cy, radius)
    else:
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        cov = (((xs - cx) ** 2 + (ys - cy) ** 2) < radius * radius).astype(np.float64)
    return Image(bg + (fg - bg) * cov)


def textured_disk(
    width: int,
    height: int,
    cx: float,
    cy: float,
    radius: float,
    seed: int = 0,
    bg: float = 0.0,
) -> Image:
    """Disk filled with a seeded texture that rides with its center.

    The pattern is sampled at (x - cx, y - cy), so two renderings that
    differ only in center are exact translations of each other — unlike a
    flat disk, the interior carries gradients a flow estimator can lock
    onto (the flat disk's interior correspondence is ambiguous).
    """
    msize = 2 * (int(np.ceil(radius)) + 3)
    master = make_texture(msize, msize, seed=seed)
    anchor = (msize - 1) / 2.0
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    sx = np.clip(xs - cx + anchor, 0.0, msize - 1.0)
    sy = np.clip(ys - cy + anchor, 0.0, msize - 1.0)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, msize - 2)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, msize - 2)
    fx = sx - x0
    fy = sy - y0
    sample = (
        master[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + master[y0, x0 + 1] * fx * (1.0 - fy)
        + master[y0 + 1, x0] * (1.0 - fx) * fy
        + master[y0 + 1, x0 + 1] * fx * fy
    )
    cov = disk_coverage(width, height, cx, cy, radius)
    return Image(bg + (sample - bg) * cov)


def make_texture(width: int, height: int, seed: int = 0, n_waves: int = 40) -> np.ndarray:
    """Smooth, aperiodic test texture: a seeded sum of oriented plane waves.

    Wavelengths span 8..160 px: the long waves keep coarse pyramid levels
    unambiguous for large displacements, the short ones pin sub-pixel
    alignment.  Values are normalized to [0.05, 0.95].
    """
    rng = np.random.default_rng(seed)
    wavelengths = np.exp(rng.uniform(np.log(8.0), np.log(160.0), n_waves))
    angles = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    amps = np.sqrt(wavelengths)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    tex = np.zeros((height, width))
    for lam, ang, ph, amp in zip(wavelengths, angles, phases, amps):
        k = 2.0 * np.pi / lam
        tex += amp * np.sin(k * (np.cos(ang) * xs + np.sin(ang) * ys) + ph)
    lo, hi = tex.min(), tex.max()
    return 0.05 + 0.9 * (tex - lo) / (hi - lo)


def crop_image(texture: np.ndarray, ox: float, oy: float, width: int, height: int) -> Image:
    """Cut a width x height window at offset (ox, oy) from a texture raster.

    Integer offsets index the raster directly, so two crops are related
    by an exact translation on their shared support; fractional offsets
    fall back to bilinear sampling.
    """
    th, tw = texture.shape
    if not (0 <= ox <= tw - width and 0 <= oy <= th - height):
        raise ValueError(
            f"crop window {width}x{height} at offset ({ox}, {oy}) "
            f"exceeds texture bounds {tw}x{th}"
        )
    if float(ox).is_integer() and float(oy).is_integer():
        ix, iy = int(ox), int(oy)
        return Image(texture[iy : iy + height, ix : ix + width])
    vx = np.full((height, width), float(ox))
    vy = np.full((height, width), float(oy))
    data = kernels().warp_bilinear(np.ascontiguousarray(texture, dtype=np.float64), vx, vy, True)
    return Image(data[:height, :width]) if data.shape != (height, width) else Image(data)


def affine_image(reference: np.ndarray, a: np.ndarray, t: np.ndarray) -> Image:
    """Resample ``reference`` under x -> center + (A + I)(x - center) + t.

    The linear part acts about the canvas center (keeps small rotations
    in frame); sampling clamps at the borders.  A = 0, t = 0 reproduces
    the reference exactly.
    """
    ref = np.ascontiguousarray(reference, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).reshape(2, 2)
    t = np.asarray(t, dtype=np.float64).reshape(2)
    h, w = ref.shape
    c0x, c0y = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rx = xs - c0x
    ry = ys - c0y
    vx = a[0, 0] * rx + a[0, 1] * ry + t[0]
    vy = a[1, 0] * rx + a[1, 1] * ry + t[1]
    data = kernels().warp_bilinear(ref, vx, vy, True)
    return Image(data)


@dataclass(frozen=True)
class SceneSpec:
    """Declarative description of one synthetic frame."""

    kind: str
    width: int
    height: int
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    offset: tuple[float, float] = (0.0, 0.0)
    affine: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    texture: np.ndarray | None = None
    antialias: bool = True
    fg: float = 1.0
    bg: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("disk", "patch-crop", "affine"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bad canvas {self.width}x{self.height}")
        if self.kind == "disk" and self.radius <= 0:
            raise ValueError("disk scenes need a positive radius")
        if self.kind in ("patch-crop", "affine") and self.texture is None:
            raise ValueError(f"{self.kind} scenes need a source texture")
        if self.kind == "affine" and self.affine is None:
            raise ValueError("affine scenes need an (A, t) pair")


def generate(spec: SceneSpec) -> Image:
    """Render the frame a SceneSpec describes."""
    if spec.kind == "disk":
        return disk_image(
            spec.width,
            spec.height,
            spec.center[0],
            spec.center[1],
            spec.radius,
            antialias=spec.antialias,
            fg=spec.fg,
            bg=spec.bg,
        )
    if spec.kind == "patch-crop":
        return crop_image(spec.texture, spec.offset[0], spec.offset[1], spec.width, spec.height)
    a, t = spec.affine
    ref = spec.texture
    if ref.shape != (spec.height, spec.width):
        raise ValueError(
            f"affine reference shape {ref.shape} must match canvas "
            f"{spec.height}x{spec.width}"
        )
    return affine_image(ref, np.asarray(a), np.asarray(t))

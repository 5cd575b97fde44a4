"""Core containers and pixel-level transport operations.

Images are real-valued intensity rasters on a unit pixel grid; pixel
centers sit at integer coordinates with x running along columns and y
along rows.  A flow field assigns each pixel a displacement (vx, vy);
warping reads the source image at x + v(x) (backward sampling), so
content moves by -v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels


def _as_plane(arr: np.ndarray, name: str) -> np.ndarray:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Image:
    """Single-channel intensity raster with square pixels of side ``pixel_size``."""

    data: np.ndarray
    pixel_size: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _as_plane(self.data, "image data"))
        if not (self.pixel_size > 0 and np.isfinite(self.pixel_size)):
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field, in pixels."""

    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vx", _as_plane(self.vx, "vx"))
        object.__setattr__(self, "vy", _as_plane(self.vy, "vy"))
        if self.vx.shape != self.vy.shape:
            raise ValueError(f"vx/vy shape mismatch: {self.vx.shape} vs {self.vy.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.vx.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)


def zero_flow(height: int, width: int) -> FlowField:
    return FlowField(np.zeros((height, width)), np.zeros((height, width)))


def constant_flow(height: int, width: int, vx: float, vy: float) -> FlowField:
    return FlowField(np.full((height, width), float(vx)), np.full((height, width), float(vy)))


def warp(image: Image, flow: FlowField, mode: str = "zero") -> Image:
    """Backward-warp ``image`` by ``flow``: out(x) = image(x + flow(x)).

    Bilinear sampling; reads outside the domain give 0 by default, or the
    nearest border value with ``mode="clamp"``.  Content is displaced by
    -flow, and a zero field reproduces the input exactly.
    """
    if flow.shape != image.shape:
        raise ValueError(f"flow shape {flow.shape} does not match image shape {image.shape}")
    if mode not in ("zero", "clamp"):
        raise ValueError(f"mode must be 'zero' or 'clamp', got {mode!r}")
    out = kernels().warp_bilinear(image.data, flow.vx, flow.vy, mode == "clamp")
    return Image(out, image.pixel_size)


def compose_flows(f: FlowField, g: FlowField) -> FlowField:
    """Field of the two-step warp: warp(I, compose_flows(f, g)) == warp(warp(I, f), g).

    Pointwise, (f after g)(x) = g(x) + f(x + g(x)); f is sampled
    bilinearly with border clamping.  For constant fields this is exactly
    f + g.
    """
    if f.shape != g.shape:
        raise ValueError(f"flow shape mismatch: {f.shape} vs {g.shape}")
    k = kernels()
    fx = k.warp_bilinear(f.vx, g.vx, g.vy, True)
    fy = k.warp_bilinear(f.vy, g.vx, g.vy, True)
    return FlowField(g.vx + fx, g.vy + fy)


def scale_flow(flow: FlowField, factor: float) -> FlowField:
    """Scale all displacements by ``factor``."""
    if not np.isfinite(factor):
        raise ValueError(f"scale factor must be finite, got {factor}")
    return FlowField(flow.vx * factor, flow.vy * factor)


def l2_distance(a: Image, b: Image) -> float:
    """Root-sum-square intensity difference weighted by pixel area.

    Resolution-stable: refining the grid of the same scene (with
    pixel_size scaled accordingly) leaves the value asymptotically
    unchanged.
    """
    if a.shape != b.shape:
        raise ValueError(f"image shape mismatch: {a.shape} vs {b.shape}")
    if a.pixel_size != b.pixel_size:
        raise ValueError(f"pixel_size mismatch: {a.pixel_size} vs {b.pixel_size}")
    diff = a.data - b.data
    return float(np.sqrt(np.sum(diff * diff) * a.pixel_size * a.pixel_size))

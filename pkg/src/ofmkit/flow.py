"""Dense flow estimation with a forward-backward consistency gate.

The estimator minimizes the classic quadratic brightness-constancy +
smoothness energy by fixed-count Jacobi sweeps on a coarse-to-fine
pyramid, re-linearizing (warping) a few times per level.  Everything is
deterministic: fixed iteration counts, no data-dependent stopping, and
kernels whose results do not depend on the thread count.

A pair of frames counts as flow-neighbors when the forward and backward
fields invert each other to within ``epsilon`` pixels on average; pixels
whose forward target lands outside the frame are excluded from that mean
and their fraction is reported.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .image import FlowField, Image

_MIN_COARSE_SIDE = 16
_WARP_PASSES = 3


@dataclass(frozen=True)
class FlowConfig:
    """Estimator knobs.

    alpha       smoothness weight (intensities in [0, 1], units ~gradient)
    iterations  Jacobi sweeps per pyramid level, split across re-warps
    levels      pyramid depth cap; actual depth keeps the coarsest level
                at >= 16 px per side
    downscale   per-level shrink factor, in (0, 1)
    epsilon     mean forward-backward error admitted as consistent, px
    """

    alpha: float = 0.2
    iterations: int = 240
    levels: int = 4
    downscale: float = 0.5
    epsilon: float = 0.5

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if not (0.0 < self.downscale < 1.0):
            raise ValueError(f"downscale must be in (0, 1), got {self.downscale}")
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class ConsistencyReport:
    fb_error: float
    oob_fraction: float
    consistent: bool


@dataclass(frozen=True)
class FlowResult:
    """One direction of a vetted flow estimate."""

    flow: FlowField
    residual: np.ndarray
    fb_error: float
    oob_fraction: float
    consistent: bool


def _smooth(img: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur with replicated borders."""
    p = np.pad(img, ((0, 0), (2, 2)), mode="edge")
    img = (p[:, :-4] + p[:, 4:] + 4.0 * (p[:, 1:-3] + p[:, 3:-1]) + 6.0 * p[:, 2:-2]) / 16.0
    p = np.pad(img, ((2, 2), (0, 0)), mode="edge")
    return (p[:-4] + p[4:] + 4.0 * (p[1:-3] + p[3:-1]) + 6.0 * p[2:-2]) / 16.0


def _grad_x(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, ((0, 0), (1, 1)), mode="edge")
    return (p[:, 2:] - p[:, :-2]) * 0.5


def _grad_y(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, ((1, 1), (0, 0)), mode="edge")
    return (p[2:] - p[:-2]) * 0.5


def _pyramid_shapes(height: int, width: int, cfg: FlowConfig) -> list[tuple[int, int]]:
    shapes = [(height, width)]
    for _ in range(cfg.levels - 1):
        h = int(round(shapes[-1][0] * cfg.downscale))
        w = int(round(shapes[-1][1] * cfg.downscale))
        if min(h, w) < _MIN_COARSE_SIDE:
            break
        shapes.append((h, w))
    return shapes


def _split_iterations(total: int) -> list[int]:
    base, rem = divmod(total, _WARP_PASSES)
    return [base + (1 if i < rem else 0) for i in range(_WARP_PASSES) if base or i < rem]


def estimate_flow(m1: Image, m2: Image, cfg: FlowConfig = FlowConfig()) -> FlowField:
    """Estimate v with m1(x + v(x)) ~ m2(x), i.e. warp(m1, v) ~ m2."""
    if m1.shape != m2.shape:
        raise ValueError(f"frame shapes differ: {m1.shape} vs {m2.shape}")
    if np.ptp(m1.data) == 0.0 and np.ptp(m2.data) == 0.0:
        warnings.warn("both frames are constant; returning zero flow", RuntimeWarning)
        h, w = m1.shape
        return FlowField(np.zeros((h, w)), np.zeros((h, w)))

    k = kernels()
    shapes = _pyramid_shapes(m1.height, m1.width, cfg)
    pyr1 = [m1.data]
    pyr2 = [m2.data]
    for h, w in shapes[1:]:
        pyr1.append(k.resize_bilinear(_smooth(pyr1[-1]), h, w))
        pyr2.append(k.resize_bilinear(_smooth(pyr2[-1]), h, w))

    alpha2 = cfg.alpha * cfg.alpha
    chunks = _split_iterations(cfg.iterations)
    u = np.zeros(shapes[-1])
    v = np.zeros(shapes[-1])
    for level in range(len(shapes) - 1, -1, -1):
        h, w = shapes[level]
        if u.shape != (h, w):
            oh, ow = u.shape
            u = k.resize_bilinear(u, h, w) * (w / ow)
            v = k.resize_bilinear(v, h, w) * (h / oh)
        i1, i2 = pyr1[level], pyr2[level]
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        for sweeps in chunks:
            i1w = k.warp_bilinear(i1, u, v, True)
            # Pixels sourcing from outside the frame carry no brightness
            # evidence; zeroing their data term leaves them to the
            # smoothness fill instead of fighting clamped border values.
            inb = (
                (xs + u >= 0.0)
                & (xs + u <= w - 1.0)
                & (ys + v >= 0.0)
                & (ys + v <= h - 1.0)
            ).astype(np.float64)
            ix = 0.5 * (_grad_x(i1w) + _grad_x(i2)) * inb
            iy = 0.5 * (_grad_y(i1w) + _grad_y(i2)) * inb
            t0 = (i1w - i2) * inb - ix * u - iy * v
            denom = alpha2 + ix * ix + iy * iy
            u, v = k.hs_sweeps(ix, iy, t0, denom, u, v, sweeps)
    return FlowField(u, v)


def check_consistency(
    forward: FlowField, backward: FlowField, cfg: FlowConfig = FlowConfig()
) -> ConsistencyReport:
    """Mean |f(x) + b(x + f(x))| over pixels whose target stays in frame."""
    if forward.shape != backward.shape:
        raise ValueError(f"flow shapes differ: {forward.shape} vs {backward.shape}")
    err, valid = kernels().fb_terms(forward.vx, forward.vy, backward.vx, backward.vy)
    n_valid = int(valid.sum())
    oob = 1.0 - n_valid / err.size
    if n_valid == 0:
        return ConsistencyReport(float("inf"), 1.0, False)
    fb = float(err.sum() / n_valid)
    return ConsistencyReport(fb, oob, fb <= cfg.epsilon)


def flow_pair(
    m1: Image, m2: Image, cfg: FlowConfig = FlowConfig()
) -> tuple[FlowResult, FlowResult]:
    """Estimate both directions between two frames and vet each against the other."""
    fwd = estimate_flow(m1, m2, cfg)
    bwd = estimate_flow(m2, m1, cfg)
    rep_f = check_consistency(fwd, bwd, cfg)
    rep_b = check_consistency(bwd, fwd, cfg)
    k = kernels()
    res_f = k.warp_bilinear(m1.data, fwd.vx, fwd.vy, True) - m2.data
    res_b = k.warp_bilinear(m2.data, bwd.vx, bwd.vy, True) - m1.data
    return (
        FlowResult(fwd, res_f, rep_f.fb_error, rep_f.oob_fraction, rep_f.consistent),
        FlowResult(bwd, res_b, rep_b.fb_error, rep_b.oob_fraction, rep_b.consistent),
    )


def flow_between(m1: Image, m2: Image, cfg: FlowConfig = FlowConfig()) -> FlowResult | None:
    """Vetted flow from m1 to m2, or None when the pair is not mutually consistent.

    Absence means m2 is outside m1's flow neighborhood at this epsilon;
    membership is symmetric because both directions must pass.
    """
    fwd, bwd = flow_pair(m1, m2, cfg)
    if fwd.consistent and bwd.consistent:
        return fwd
    return None


def flow_norm(flow: FlowField, support: np.ndarray | None = None) -> float:
    """RMS flow magnitude, optionally restricted to a boolean support mask."""
    mag2 = flow.vx * flow.vx + flow.vy * flow.vy
    if support is None:
        return float(np.sqrt(mag2.mean()))
    mask = np.asarray(support, dtype=bool)
    if mask.shape != flow.shape:
        raise ValueError(f"support shape {mask.shape} does not match flow {flow.shape}")
    n = int(mask.sum())
    if n == 0:
        raise ValueError("empty support mask")
    return float(np.sqrt(mag2[mask].sum() / n))

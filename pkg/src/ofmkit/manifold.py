"""Geodesy on sampled articulation manifolds.

Interpolation rides estimated flows instead of blending pixels; the
embedding is classical MDS of the squared geodesic distances; intrinsic
(Karcher) averaging iterates the mean of the flows from the running
estimate to every sample; parameter estimation snaps a query to its
nearest consistent template and reads the residual flow through an
articulation-specific calibration map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowConfig, flow_between, flow_norm
from .graph import FlowGraph, flow_metric, geodesic_nodes
from .image import FlowField, Image, l2_distance, scale_flow, warp


def linear_blend(m1: Image, m2: Image, t: float) -> Image:
    """Pixelwise cross-fade (the double-exposure baseline)."""
    if m1.shape != m2.shape:
        raise ValueError(f"image shapes differ: {m1.shape} vs {m2.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"blend parameter must lie in [0, 1], got {t}")
    return Image((1.0 - t) * m1.data + t * m2.data, m1.pixel_size)


def interpolate(m1: Image, m2: Image, t: float, cfg: FlowConfig = FlowConfig()) -> Image:
    """Transport m1 a fraction t of the way to m2 along the estimated flow.

    Requires the pair to be mutually flow-consistent; for farther pairs,
    route along a graph geodesic and interpolate hop by hop
    (``interpolate_route``).
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {t}")
    res = flow_between(m1, m2, cfg)
    if res is None:
        raise ValueError(
            "frames are not flow-consistent; route through geodesic_nodes "
            "and interpolate per hop"
        )
    return warp(m1, scale_flow(res.flow, t))


def interpolate_route(graph: FlowGraph, src: int, dst: int, t: float) -> Image:
    """Interpolate along the graph geodesic, allocating t by arc length."""
    if graph.images is None:
        raise ValueError("graph carries no images")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {t}")
    path = geodesic_nodes(graph, src, dst)
    if len(path) == 1:
        return graph.images[src]
    hops = [graph.edge(path[k], path[k + 1]).weight for k in range(len(path) - 1)]
    cum = np.concatenate([[0.0], np.cumsum(hops)])
    a = t * cum[-1]
    k = min(int(np.searchsorted(cum, a, side="right")) - 1, len(hops) - 1)
    k = max(k, 0)
    frac = (a - cum[k]) / hops[k]
    return warp(graph.images[path[k]], scale_flow(graph.hop_flow(path[k], path[k + 1]), frac))


@dataclass(frozen=True)
class Embedding:
    """Classical-MDS coordinates plus the full centered-Gram spectrum."""

    coords: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.eigenvalues > 0.0))


def embed(distances: np.ndarray, dim: int = 2) -> Embedding:
    """Embed a finite metric by double-centering its squared distances.

    Coordinates take the top ``dim`` eigenpairs in descending eigenvalue
    order; non-positive directions contribute zero coordinates (inspect
    ``eigenvalues`` for deficiencies).  Disconnected inputs (inf) are
    rejected.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    n = d.shape[0]
    if not (1 <= dim <= n):
        raise ValueError(f"dim must be in [1, {n}], got {dim}")
    if not np.all(np.isfinite(d)):
        raise ValueError("distance matrix has non-finite entries (disconnected graph?)")
    if not np.allclose(d, d.T, rtol=0.0, atol=1e-9 * max(1.0, float(np.abs(d).max()))):
        raise ValueError("distance matrix must be symmetric")
    sq = d * d
    row = sq.mean(axis=1, keepdims=True)
    col = sq.mean(axis=0, keepdims=True)
    b = -0.5 * (sq - row - col + sq.mean())
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    coords = vecs[:, :dim] * np.sqrt(np.clip(vals[:dim], 0.0, None))
    # deterministic sign: largest-magnitude entry of each axis is positive
    for k in range(coords.shape[1]):
        col_k = coords[:, k]
        if col_k.any():
            lead = np.argmax(np.abs(col_k))
            if col_k[lead] < 0:
                coords[:, k] = -col_k
    return Embedding(coords, vals)


def procrustes_residual(coords: np.ndarray, reference: np.ndarray) -> float:
    """Misfit after the best similarity transform, as a fraction of the
    reference scatter.

    Minimizes ||s*X*R + t - Y||_F over rotations/reflections R, scale s,
    translation t; returns the minimum divided by ||Y - mean(Y)||_F, so 0
    is a perfect match and values near 1 mean no similarity at all.
    """
    x = np.asarray(coords, dtype=np.float64)
    y = np.asarray(reference, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"point sets must share shape, got {x.shape} vs {y.shape}")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    nx = float(np.linalg.norm(xc))
    ny = float(np.linalg.norm(yc))
    if nx == 0.0 or ny == 0.0:
        raise ValueError("degenerate point set: zero scatter")
    s = np.linalg.svd(xc.T @ yc, compute_uv=False).sum()
    return float(np.sqrt(max(0.0, 1.0 - (s / (nx * ny)) ** 2)))


@dataclass(frozen=True)
class KarcherResult:
    mean: Image
    iterations: int
    converged: bool
    final_norm: float
    init_index: int | None
    trace: tuple[float, ...] = ()


def karcher_mean(
    images: list[Image] | tuple[Image, ...],
    cfg: FlowConfig = FlowConfig(),
    step: float = 0.5,
    tol: float = 0.05,
    max_iters: int = 50,
    init: int | Image | None = None,
) -> KarcherResult:
    """Intrinsic average: repeatedly warp the estimate along the mean of
    the flows toward every sample.

    Stops when the mean-flow RMS drops to ``tol`` pixels.  Default
    initialization is the sample medoid under the flow metric, which
    requires the samples to be pairwise reachable.
    """
    images = tuple(images)
    if not images:
        raise ValueError("karcher_mean needs at least one image")
    if not 0.0 < step <= 1.0:
        raise ValueError(f"step must be in (0, 1], got {step}")
    init_index: int | None = None
    if init is None:
        from .graph import build_graph

        d = flow_metric(build_graph(images, cfg))
        if not np.all(np.isfinite(d)):
            raise ValueError("samples are not pairwise reachable; medoid is undefined")
        init_index = int(np.argmin(d.sum(axis=1)))
        estimate = images[init_index]
    elif isinstance(init, Image):
        estimate = init
    else:
        init_index = int(init)
        estimate = images[init_index]

    iterations = 0
    phi_norm = float("inf")
    trace: list[float] = []
    for iterations in range(1, max_iters + 1):
        vxs, vys = [], []
        for im in images:  # fixed order: the reduction is reproducible
            res = flow_between(estimate, im, cfg)
            if res is not None:
                vxs.append(res.flow.vx)
                vys.append(res.flow.vy)
        if not vxs:
            raise ValueError("mean estimate lost flow consistency with every sample")
        phi = FlowField(np.mean(vxs, axis=0), np.mean(vys, axis=0))
        phi_norm = flow_norm(phi)
        trace.append(phi_norm)
        if phi_norm <= tol:
            return KarcherResult(estimate, iterations, True, phi_norm, init_index, tuple(trace))
        estimate = warp(estimate, scale_flow(phi, step))
    return KarcherResult(estimate, iterations, False, phi_norm, init_index, tuple(trace))


@dataclass(frozen=True)
class TemplateSet:
    """Labeled anchor frames: thetas[i] is the articulation of images[i].

    kind picks the flow-to-parameter calibration: "translation" thetas
    are content positions (cx, cy); "affine" thetas are
    (a11, a12, a21, a22, tx, ty) acting about the canvas center, matching
    ``scenes.affine_image``.
    """

    images: tuple[Image, ...]
    thetas: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "thetas", np.atleast_2d(np.asarray(self.thetas, dtype=np.float64)))
        if self.kind not in ("translation", "affine"):
            raise ValueError(f"unknown template kind {self.kind!r}")
        want = 2 if self.kind == "translation" else 6
        if self.thetas.shape != (len(self.images), want):
            raise ValueError(
                f"thetas shape {self.thetas.shape} does not match "
                f"{len(self.images)} {self.kind} templates (need ({len(self.images)}, {want}))"
            )


@dataclass(frozen=True)
class EstimateResult:
    theta: np.ndarray
    template_index: int
    distance: float
    flow: FlowField


def _fit_affine(flow: FlowField) -> np.ndarray:
    h, w = flow.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    rx = (xs - (w - 1) / 2.0).ravel()
    ry = (ys - (h - 1) / 2.0).ravel()
    design = np.column_stack([rx, ry, np.ones_like(rx)])
    cx, *_ = np.linalg.lstsq(design, flow.vx.ravel(), rcond=None)
    cy, *_ = np.linalg.lstsq(design, flow.vy.ravel(), rcond=None)
    return np.array([cx[0], cx[1], cy[0], cy[1], cx[2], cy[2]])


def estimate_parameter(
    templates: TemplateSet, query: Image, cfg: FlowConfig = FlowConfig()
) -> EstimateResult:
    """Nearest consistent template plus the calibrated flow correction.

    Translation: content moves by minus the mean flow over the template
    foreground, so theta = theta_template - mean(flow).  Affine: (A, t)
    least-squares fit of the flow about the canvas center added to the
    template parameters (exact for identity templates, first-order
    otherwise).
    """
    best: tuple[float, int, FlowField] | None = None
    for idx, im in enumerate(templates.images):
        res = flow_between(im, query, cfg)
        if res is None:
            continue
        dist = flow_norm(res.flow)
        if best is None or dist < best[0]:
            best = (dist, idx, res.flow)
    if best is None:
        raise ValueError("query is not flow-consistent with any template")
    dist, idx, flow = best
    theta0 = templates.thetas[idx]
    if templates.kind == "translation":
        data = templates.images[idx].data
        mask = data > 0.5 * (data.min() + data.max())
        if not mask.any():
            mask = np.ones_like(data, dtype=bool)
        delta = np.array([float(flow.vx[mask].mean()), float(flow.vy[mask].mean())])
        theta = theta0 - delta
    else:
        theta = theta0 + _fit_affine(flow)
    return EstimateResult(theta, idx, dist, flow)

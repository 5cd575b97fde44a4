"""Analytic articulation families and their parameter-space geometry.

Two families of flow fields on a planar camera domain: affine fields
v(x) = A x + t on the unit square, and rigid-motion fields of a depth
surface under exact perspective or weak perspective.  For each family
the continuous field L2 distance equals a quadratic form in parameter
space; the moment matrices of those forms are available both in closed
form (affine) and by midpoint quadrature, so the correspondence can be
checked numerically (``verify_affine_isometry`` / ``verify_pose_wp``).

Weak perspective divides by a single reference depth instead of the
per-point depth and keeps only the linear part of the rotation; its
deviation from the exact field vanishes to second order in the spin
magnitude (and to first order in depth variation), which
``pose_wp_deviation`` measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .image import FlowField

_AFFINE_NAMES = ("a11", "a12", "a21", "a22", "tx", "ty")
_POSE_NAMES = ("wx", "wy", "wz", "tx", "ty")


@dataclass(frozen=True)
class DomainGrid:
    """Midpoint sampling of an axis-aligned camera window."""

    nx: int
    ny: int
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("empty domain window")

    @property
    def cell_area(self) -> float:
        return ((self.x1 - self.x0) / self.nx) * ((self.y1 - self.y0) / self.ny)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays (X, Y), each (ny, nx)."""
        dx = (self.x1 - self.x0) / self.nx
        dy = (self.y1 - self.y0) / self.ny
        xs = self.x0 + (np.arange(self.nx) + 0.5) * dx
        ys = self.y0 + (np.arange(self.ny) + 0.5) * dy
        return np.meshgrid(xs, ys)


def unit_grid(n: int = 256) -> DomainGrid:
    """The unit square, the affine family's reference domain."""
    return DomainGrid(n, n)


def pose_grid(n: int = 256, half_width: float = 0.1) -> DomainGrid:
    """Narrow window centered on the optical axis for the pose family."""
    return DomainGrid(n, n, -half_width, half_width, -half_width, half_width)


def field_l2_distance(f1: FlowField, f2: FlowField, grid: DomainGrid) -> float:
    """Continuous L2 distance of two fields sampled on the grid
    (cell-area-weighted quadrature of the squared difference)."""
    if f1.shape != f2.shape or f1.shape != (grid.ny, grid.nx):
        raise ValueError("fields must be sampled on the given grid")
    dx = f1.vx - f2.vx
    dy = f1.vy - f2.vy
    return float(np.sqrt((np.sum(dx * dx) + np.sum(dy * dy)) * grid.cell_area))


# ---------------------------------------------------------------------------
# affine family


def affine_flow(theta: np.ndarray, grid: DomainGrid) -> FlowField:
    """v(x, y) = A (x, y) + t with theta = (a11, a12, a21, a22, tx, ty)."""
    th = np.asarray(theta, dtype=np.float64)
    if th.shape != (6,):
        raise ValueError(f"affine parameter must be a 6-vector, got shape {th.shape}")
    x, y = grid.points()
    vx = th[0] * x + th[1] * y + th[4]
    vy = th[2] * x + th[3] * y + th[5]
    return FlowField(vx, vy)


def affine_sigma() -> np.ndarray:
    """Exact moment matrix of the affine family over the unit square.

    Sigma[p, q] = integral of the p-th and q-th basis fields' dot product;
    with monomial moments E[x^2] = E[y^2] = 1/3, E[xy] = 1/4,
    E[x] = E[y] = 1/2 it is two copies of the same 3x3 block, one per
    flow component.
    """
    block = np.array([
        [1.0 / 3.0, 1.0 / 4.0, 1.0 / 2.0],
        [1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0],
        [1.0 / 2.0, 1.0 / 2.0, 1.0],
    ])
    sigma = np.zeros((6, 6))
    sigma[np.ix_([0, 1, 4], [0, 1, 4])] = block  # vx row: a11, a12, tx
    sigma[np.ix_([2, 3, 5], [2, 3, 5])] = block  # vy row: a21, a22, ty
    return sigma


def affine_sigma_quadrature(grid: DomainGrid) -> np.ndarray:
    """Moment matrix by midpoint quadrature on an arbitrary window."""
    x, y = grid.points()
    xf, yf = x.ravel(), y.ravel()
    one = np.ones_like(xf)
    zero = np.zeros_like(xf)
    rows_x = np.stack([xf, yf, zero, zero, one, zero], axis=1)
    rows_y = np.stack([zero, zero, xf, yf, zero, one], axis=1)
    return (rows_x.T @ rows_x + rows_y.T @ rows_y) * grid.cell_area


def affine_distance(theta1: np.ndarray, theta2: np.ndarray) -> float:
    """Parameter-space distance equal to the continuous field L2 distance."""
    d = np.asarray(theta1, dtype=np.float64) - np.asarray(theta2, dtype=np.float64)
    if d.shape != (6,):
        raise ValueError(f"affine parameters must be 6-vectors, got shape {d.shape}")
    return float(np.sqrt(d @ affine_sigma() @ d))


# ---------------------------------------------------------------------------
# rigid pose family


def spin_matrix(omega: np.ndarray) -> np.ndarray:
    """Skew generator of the spin (wx, wy, wz):

        [[ 0, -wx,  wy],
         [ wx,  0, -wz],
         [-wy, wz,   0]]

    The axis ordering is chosen so wz tips the optical axis along x, wx
    rolls about it, and wy tips along y; ``rotation_from_spin``
    exponentiates the same generator.
    """
    w = np.asarray(omega, dtype=np.float64)
    if w.shape != (3,):
        raise ValueError(f"spin must be a 3-vector, got shape {w.shape}")
    wx, wy, wz = w
    return np.array([
        [0.0, -wx, wy],
        [wx, 0.0, -wz],
        [-wy, wz, 0.0],
    ])


def rotation_from_spin(omega: np.ndarray) -> np.ndarray:
    """exp of the spin generator, stable for small angles.

    Uses R = I + c1*S + c2*S^2 with c1 = sin(a)/a and c2 = (1-cos a)/a^2
    written via half-angle sinc, so both coefficients are smooth at a = 0.
    """
    s = spin_matrix(omega)
    a = float(np.linalg.norm(np.asarray(omega, dtype=np.float64)))
    c1 = np.sinc(a / np.pi)
    half = np.sinc(a / (2.0 * np.pi))
    c2 = 0.5 * half * half
    return np.eye(3) + c1 * s + c2 * (s @ s)


def _depth_on(grid: DomainGrid, depth) -> np.ndarray:
    x, _ = grid.points()
    lam = np.asarray(depth(x, _) if callable(depth) else depth, dtype=np.float64)
    lam = np.broadcast_to(lam, x.shape).astype(np.float64)
    if np.any(lam <= 0):
        raise NumericalError("depth must be positive over the whole window")
    return lam


def pose_flow(
    omega: np.ndarray,
    trans: np.ndarray,
    grid: DomainGrid,
    depth=1.0,
) -> FlowField:
    """Exact perspective flow of a rigid motion of the depth surface.

    Each pixel (x, y) back-projects to lam(x, y) * (x, y, 1); the rigid
    motion exp(spin), trans moves it, and reprojection by z gives the new
    image position.  ``depth`` is a scalar, an (ny, nx) array, or a
    callable lam(x, y).  Raises when any moved point's depth falls below
    1e-9 (reprojection blows up).
    """
    t = np.asarray(trans, dtype=np.float64)
    if t.shape != (3,):
        raise ValueError(f"translation must be a 3-vector, got shape {t.shape}")
    r = rotation_from_spin(omega)
    x, y = grid.points()
    lam = _depth_on(grid, depth)
    px, py, pz = lam * x, lam * y, lam
    qx = r[0, 0] * px + r[0, 1] * py + r[0, 2] * pz + t[0]
    qy = r[1, 0] * px + r[1, 1] * py + r[1, 2] * pz + t[1]
    qz = r[2, 0] * px + r[2, 1] * py + r[2, 2] * pz + t[2]
    if np.any(qz <= 1e-9):
        raise NumericalError("moved surface reaches the camera plane (z <= 0)")
    return FlowField(qx / qz - x, qy / qz - y)


def pose_flow_wp(
    omega: np.ndarray,
    trans: np.ndarray,
    grid: DomainGrid,
    depth=1.0,
    z_ref: float | None = None,
) -> FlowField:
    """Weak-perspective flow: linearized rotation, common reference depth.

    The moved point keeps only the linear spin term, (I + S) p + t, and
    projects by the constant z_ref (mean depth over the window by
    default) instead of its own z.  The z component of ``trans`` drops
    out entirely, so the parameter vector is (wx, wy, wz, tx, ty):

        vx = (-wx * lam * y + wy * lam + tx) / z_ref
        vy = ( wx * lam * x - wz * lam + ty) / z_ref
    """
    w = np.asarray(omega, dtype=np.float64)
    t = np.asarray(trans, dtype=np.float64)
    if w.shape != (3,):
        raise ValueError(f"spin must be a 3-vector, got shape {w.shape}")
    if t.shape != (3,):
        raise ValueError(f"translation must be a 3-vector, got shape {t.shape}")
    x, y = grid.points()
    lam = _depth_on(grid, depth)
    if z_ref is None:
        z_ref = float(lam.mean())
    if z_ref <= 0:
        raise NumericalError("reference depth must be positive")
    vx = (-w[0] * lam * y + w[1] * lam + t[0]) / z_ref
    vy = (w[0] * lam * x - w[2] * lam + t[1]) / z_ref
    return FlowField(vx, vy)


def pose_theta(omega: np.ndarray, trans: np.ndarray) -> np.ndarray:
    """Weak-perspective parameter vector (wx, wy, wz, tx, ty)."""
    w = np.asarray(omega, dtype=np.float64)
    t = np.asarray(trans, dtype=np.float64)
    return np.array([w[0], w[1], w[2], t[0], t[1]])


def pose_sigma(grid: DomainGrid, depth=1.0, z_ref: float | None = None) -> np.ndarray:
    """Moment matrix of the weak-perspective family by quadrature.

    The family is linear in (wx, wy, wz, tx, ty) with basis rows
    (-lam*y, lam, 0, 1, 0)/z_ref and (lam*x, 0, -lam, 0, 1)/z_ref, so the
    L2 distance of two fields is the quadratic form of this matrix on the
    parameter difference — exactly, not just asymptotically.
    """
    x, y = grid.points()
    lam = _depth_on(grid, depth)
    if z_ref is None:
        z_ref = float(lam.mean())
    xf, yf, lf = x.ravel(), y.ravel(), lam.ravel()
    one = np.ones_like(xf)
    zero = np.zeros_like(xf)
    rows_x = np.stack([-lf * yf, lf, zero, one, zero], axis=1) / z_ref
    rows_y = np.stack([lf * xf, zero, -lf, zero, one], axis=1) / z_ref
    return (rows_x.T @ rows_x + rows_y.T @ rows_y) * grid.cell_area


def pose_wp_distance(theta1: np.ndarray, theta2: np.ndarray, sigma: np.ndarray) -> float:
    d = np.asarray(theta1, dtype=np.float64) - np.asarray(theta2, dtype=np.float64)
    if d.shape != (5,):
        raise ValueError(f"pose parameters must be 5-vectors, got shape {d.shape}")
    return float(np.sqrt(d @ sigma @ d))


# ---------------------------------------------------------------------------
# numerical verification harnesses


@dataclass(frozen=True)
class AffineIsometryReport:
    sigma_abs_dev: float
    max_rel_dev: float
    n_pairs: int


def verify_affine_isometry(
    n_pairs: int = 100,
    resolution: int = 256,
    sigma_resolution: int = 512,
    seed: int = 0,
) -> AffineIsometryReport:
    """Check the affine parameter metric against sampled fields.

    Compares the closed-form moment matrix with high-resolution
    quadrature, and the quadratic-form distance with the gridded field L2
    distance over random parameter pairs.
    """
    rng = np.random.default_rng(seed)
    sigma_dev = float(
        np.abs(affine_sigma() - affine_sigma_quadrature(unit_grid(sigma_resolution))).max()
    )
    grid = unit_grid(resolution)
    worst = 0.0
    for _ in range(n_pairs):
        th1 = rng.normal(0.0, 0.2, size=6)
        th2 = rng.normal(0.0, 0.2, size=6)
        ref = affine_distance(th1, th2)
        got = field_l2_distance(affine_flow(th1, grid), affine_flow(th2, grid), grid)
        worst = max(worst, abs(got - ref) / ref)
    return AffineIsometryReport(sigma_dev, worst, n_pairs)


@dataclass(frozen=True)
class PoseIsometryReport:
    wp_max_rel_dev: float
    deviation_by_magnitude: dict[float, float]
    exponent: float
    n_pairs: int


def pose_field_gap(
    omega: np.ndarray,
    trans: np.ndarray,
    grid: DomainGrid,
    depth=1.0,
    z_ref: float | None = None,
) -> float:
    """Sup-norm gap between the exact and weak-perspective fields of one
    pose (the pointwise linearization error)."""
    exact = pose_flow(omega, trans, grid, depth)
    wp = pose_flow_wp(omega, trans, grid, depth, z_ref)
    return float(
        np.maximum(np.abs(exact.vx - wp.vx), np.abs(exact.vy - wp.vy)).max()
    )


def _pose_distance_deviation(
    magnitude: float,
    grid: DomainGrid,
    sigma: np.ndarray,
    n_pairs: int,
    rng: np.random.Generator,
) -> float:
    """Worst absolute gap between exact-field L2 distances and the
    weak-perspective quadratic form, over random pose pairs whose spins
    have the given magnitude (unit depth, in-plane translations)."""
    worst = 0.0
    for _ in range(n_pairs):
        a1 = rng.normal(size=3)
        a2 = rng.normal(size=3)
        w1 = magnitude * a1 / np.linalg.norm(a1)
        w2 = magnitude * a2 / np.linalg.norm(a2)
        t1 = np.array([*(0.1 * magnitude * rng.normal(size=2)), 0.0])
        t2 = np.array([*(0.1 * magnitude * rng.normal(size=2)), 0.0])
        ref = pose_wp_distance(pose_theta(w1, t1), pose_theta(w2, t2), sigma)
        got = field_l2_distance(
            pose_flow(w1, t1, grid, 1.0), pose_flow(w2, t2, grid, 1.0), grid
        )
        worst = max(worst, abs(got - ref))
    return worst


def verify_pose_wp(
    n_pairs: int = 100,
    resolution: int = 256,
    magnitudes: tuple[float, float] = (0.01, 0.1),
    seed: int = 0,
) -> PoseIsometryReport:
    """Check the weak-perspective metric and where it stops being exact.

    (1) For weak-perspective flows the gridded field L2 distance equals
    the moment quadratic form to rounding — the model is linear, so this
    is an identity, not an approximation.  (2) For exact-perspective
    flows the distances drift away from that form as spins grow; the
    drift (worst absolute gap per magnitude) should scale roughly
    quadratically in the spin magnitude, reported as the log-log slope
    between the two magnitudes.
    """
    rng = np.random.default_rng(seed)
    grid = pose_grid(resolution)
    sigma = pose_sigma(grid, depth=1.0)
    worst = 0.0
    for _ in range(n_pairs):
        w1, w2 = rng.normal(0.0, 0.05, size=3), rng.normal(0.0, 0.05, size=3)
        t1, t2 = rng.normal(0.0, 0.05, size=3), rng.normal(0.0, 0.05, size=3)
        ref = pose_wp_distance(pose_theta(w1, t1), pose_theta(w2, t2), sigma)
        if ref == 0.0:
            continue
        f1 = pose_flow_wp(w1, t1, grid, depth=1.0)
        f2 = pose_flow_wp(w2, t2, grid, depth=1.0)
        worst = max(worst, abs(field_l2_distance(f1, f2, grid) - ref) / ref)
    devs = {
        m: _pose_distance_deviation(m, grid, sigma, n_pairs, np.random.default_rng(seed))
        for m in magnitudes
    }
    m1, m2 = magnitudes
    exponent = float(np.log(devs[m2] / devs[m1]) / np.log(m2 / m1))
    return PoseIsometryReport(worst, devs, exponent, n_pairs)

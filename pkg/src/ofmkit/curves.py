"""Frame curves and transport fields along them.

A curve is a time-ordered frame sequence with a cumulative flow arc
length and, per sample, a forward reach (how far along the curve flow
estimation stays consistent from that sample).  A field on the curve
assigns each sample a forward displacement h(t) in arc units, bounded by
the reach; fields move frames along the curve rather than through pixel
space.  Fields with constant h are parallel; the saturating sum
min(h_V + h_W, reach) makes the set of fields a commutative monoid, and
h -> reach - h an involution between its extremes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowConfig, flow_norm, flow_pair
from .image import Image, scale_flow, warp

_REL_EPS = 1e-9


@dataclass(frozen=True)
class Curve:
    """Sampled frame curve: times, arc length, forward reach per sample.

    ``arc[i]`` is the cumulative flow distance from the first sample;
    ``radius[i]`` bounds how far forward of sample i transported content
    may land.  ``frames``/``hop_flows`` are present on curves built from
    images and absent on purely geometric ones.
    """

    times: np.ndarray
    arc: np.ndarray
    radius: np.ndarray
    frames: tuple[Image, ...] | None = None
    hop_flows: tuple[object, ...] | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        arc = np.asarray(self.arc, dtype=np.float64)
        radius = np.asarray(self.radius, dtype=np.float64)
        for name, a in (("times", times), ("arc", arc), ("radius", radius)):
            if a.ndim != 1 or not np.all(np.isfinite(a)):
                raise ValueError(f"curve {name} must be a finite 1-d array")
        n = times.size
        if n < 2:
            raise ValueError("a curve needs at least two samples")
        if arc.size != n or radius.size != n:
            raise ValueError("times, arc and radius must have equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if arc[0] != 0.0 or np.any(np.diff(arc) <= 0):
            raise ValueError("arc must start at 0 and strictly increase")
        if np.any(radius < 0):
            raise ValueError("radius must be non-negative")
        for a in (times, arc, radius):
            a.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "arc", arc)
        object.__setattr__(self, "radius", radius)
        if self.frames is not None:
            object.__setattr__(self, "frames", tuple(self.frames))
            if len(self.frames) != n:
                raise ValueError(f"{len(self.frames)} frames for {n} samples")
        if self.hop_flows is not None:
            object.__setattr__(self, "hop_flows", tuple(self.hop_flows))
            if len(self.hop_flows) != n - 1:
                raise ValueError(f"{len(self.hop_flows)} hop flows for {n} samples")

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    def same_geometry(self, other: "Curve") -> bool:
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.arc, other.arc)
            and np.array_equal(self.radius, other.radius)
        )

    def suffix(self, start: int) -> "Curve":
        """The curve from sample ``start`` on, with arc re-zeroed.

        Reaches are unchanged: they describe forward transport, which a
        forward truncation cannot extend.
        """
        if not (0 <= start < self.n_samples - 1):
            raise ValueError(f"start must leave at least two samples, got {start}")
        return Curve(
            self.times[start:].copy(),
            self.arc[start:] - self.arc[start],
            self.radius[start:].copy(),
            None if self.frames is None else self.frames[start:],
            None if self.hop_flows is None else self.hop_flows[start:],
        )

    @classmethod
    def from_geometry(cls, times, arc, radius) -> "Curve":
        """Geometric curve with prescribed reach (no frames attached).

        Unlike curves measured from frames, the reach here may extend past
        the final sample — useful for modeling ideal constant-reach curves
        whose underlying motion continues beyond the sampled window.
        """
        return cls(np.asarray(times, dtype=np.float64),
                   np.asarray(arc, dtype=np.float64),
                   np.asarray(radius, dtype=np.float64))


def build_curve(
    frames: list[Image] | tuple[Image, ...],
    times: np.ndarray | None = None,
    cfg: FlowConfig = FlowConfig(),
    foreground_threshold: float | None = None,
) -> Curve:
    """Measure a curve from frames: hop flows, arc length, forward reach.

    Every consecutive pair must pass the mutual consistency gate.  Hop
    length is the direction-averaged RMS flow; with a foreground
    threshold the RMS is restricted to source pixels above it (use for
    scenes whose background would dilute the motion).  The reach at
    sample i extends to the last later sample the gate accepts, scanned
    in order and stopped at the first failure; it never exceeds the end
    of the sampled window.
    """
    frames = tuple(frames)
    n = len(frames)
    if n < 2:
        raise ValueError("a curve needs at least two frames")
    if times is None:
        times = np.arange(n, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if times.shape != (n,):
        raise ValueError(f"times shape {times.shape} does not match {n} frames")

    def support_of(im: Image) -> np.ndarray | None:
        if foreground_threshold is None:
            return None
        mask = im.data > foreground_threshold
        if not mask.any():
            raise ValueError("foreground threshold leaves no pixels")
        return mask

    hop_flows = []
    hops = np.empty(n - 1)
    consistency: dict[tuple[int, int], tuple[bool, float]] = {}

    def probe(i: int, j: int) -> tuple[bool, float]:
        """(mutually consistent?, direction-averaged RMS norm)."""
        if (i, j) not in consistency:
            fwd, bwd = flow_pair(frames[i], frames[j], cfg)
            ok = fwd.consistent and bwd.consistent
            a = flow_norm(fwd.flow, support_of(frames[i]))
            b = flow_norm(bwd.flow, support_of(frames[j]))
            consistency[(i, j)] = (ok, 0.5 * (a + b))
            if ok and j == i + 1:
                hop_flows.append(fwd.flow)
        return consistency[(i, j)]

    for i in range(n - 1):
        ok, d = probe(i, i + 1)
        if not ok:
            raise ValueError(f"frames {i} and {i + 1} fail the consistency gate")
        hops[i] = d
    arc = np.concatenate([[0.0], np.cumsum(hops)])

    radius = np.zeros(n)
    for i in range(n - 1):
        last = i + 1  # the hop itself passed
        for j in range(i + 2, n):
            if not probe(i, j)[0]:
                break
            last = j
        radius[i] = arc[last] - arc[i]
    return Curve(times, arc, radius, frames, tuple(hop_flows))


def restricted_radius(curve: Curve, i: int) -> float:
    """Forward transport reach at sample i (0 at the final sample)."""
    if not (0 <= i < curve.n_samples):
        raise ValueError(f"sample {i} out of range for {curve.n_samples} samples")
    return float(curve.radius[i])


@dataclass(frozen=True)
class MotionFunction:
    """Sampled displacement profile t -> h(t) >= 0 in arc units."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if times.size == 0:
            raise ValueError("motion function needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("motion values must be finite and non-negative")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class CurveFlowField:
    """Forward transport field on a curve, stored as its displacement h.

    Defined on the first ``len(h)`` samples; feasibility 0 <= h[i] <=
    radius[i] is enforced on construction, so a field and its motion
    function round-trip exactly.
    """

    curve: Curve
    h: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("h must be a non-empty 1-d array")
        if h.size > self.curve.n_samples:
            raise ValueError(
                f"field has {h.size} samples but the curve only {self.curve.n_samples}"
            )
        if not np.all(np.isfinite(h)):
            raise ValueError("h must be finite")
        r = self.curve.radius[: h.size]
        bad = np.flatnonzero((h < 0) | (h > r))
        if bad.size:
            raise ValueError(
                "infeasible displacement at samples "
                f"{bad.tolist()}: h={h[bad].tolist()} vs reach={r[bad].tolist()}"
            )
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def n_field(self) -> int:
        return int(self.h.size)

    @property
    def domain_times(self) -> np.ndarray:
        return self.curve.times[: self.n_field]

    def target_arcs(self) -> np.ndarray:
        """Arc position each sample is carried to."""
        return self.curve.arc[: self.n_field] + self.h


def field_from_motion(curve: Curve, motion: MotionFunction) -> CurveFlowField:
    """Realize a displacement profile as a field on the curve.

    The motion's time grid must be a prefix of the curve's; infeasible
    displacements (h above the reach) are rejected with the violating
    sample indices.
    """
    k = motion.times.size
    if k > curve.n_samples or not np.array_equal(motion.times, curve.times[:k]):
        raise ValueError("motion time grid is not a prefix of the curve's")
    return CurveFlowField(curve, motion.values)


def motion_of_field(field: CurveFlowField) -> MotionFunction:
    """The displacement profile of a field (inverse of field_from_motion)."""
    return MotionFunction(field.domain_times, field.h)


def zero_field(curve: Curve, n_field: int | None = None) -> CurveFlowField:
    n = curve.n_samples if n_field is None else n_field
    return CurveFlowField(curve, np.zeros(n))


def saturated_field(curve: Curve, n_field: int | None = None) -> CurveFlowField:
    """The pointwise-maximal field: h equals the reach everywhere."""
    n = curve.n_samples if n_field is None else n_field
    return CurveFlowField(curve, curve.radius[:n].copy())


def is_parallel(field: CurveFlowField, tol: float = 0.0) -> bool:
    return float(np.ptp(field.h)) <= tol


def parallel_translate(curve: Curve, delta: float, start: int = 0) -> CurveFlowField:
    """Constant-displacement field h = delta on every sample that can carry it.

    With ``start`` > 0 the field lives on the suffix curve from that
    sample.  The domain is the prefix of samples whose target stays
    within the sampled window.  Raises when some sample in that domain
    has reach below delta (the curve pinches), naming the tightest
    sample — one pinch anywhere blocks the whole translation, however far
    from it.
    """
    if start:
        return parallel_translate(curve.suffix(start), delta)
    if not (np.isfinite(delta) and delta >= 0.0):
        raise ValueError(f"delta must be finite and non-negative, got {delta}")
    end = curve.length
    slack = _REL_EPS * max(1.0, end)
    n = int(np.sum(curve.arc + delta <= end + slack))
    if n == 0:
        raise ValueError(
            f"delta {delta:g} exceeds the curve length {end:g}; nothing to translate"
        )
    r = curve.radius[:n]
    if np.any(r < delta - slack):
        tight = int(np.argmin(r))
        raise ValueError(
            f"curve reach pinches below delta={delta:g} at sample {tight} "
            f"(reach {r[tight]:g})"
        )
    return CurveFlowField(curve, np.minimum(np.full(n, float(delta)), r))


def target_positions(field: CurveFlowField) -> tuple[np.ndarray, np.ndarray]:
    """Locate each target arc as (hop index, fraction into that hop)."""
    arc = field.curve.arc
    targets = field.target_arcs()
    slack = _REL_EPS * max(1.0, field.curve.length)
    if np.any(targets > arc[-1] + slack):
        raise ValueError("field targets fall beyond the final sample")
    targets = np.minimum(targets, arc[-1])
    seg = np.clip(np.searchsorted(arc, targets, side="right") - 1, 0, arc.size - 2)
    frac = (targets - arc[seg]) / (arc[seg + 1] - arc[seg])
    return seg.astype(np.int64), frac


def realize_frames(field: CurveFlowField) -> tuple[Image, ...]:
    """Carry each domain frame to its target: whole hops step from sample
    to sample, the leftover fraction scales the final hop flow."""
    curve = field.curve
    if curve.frames is None or curve.hop_flows is None:
        raise ValueError("curve has no frames to realize the field on")
    seg, frac = target_positions(field)
    out = []
    for i in range(field.n_field):
        s, f = int(seg[i]), float(frac[i])
        if f == 0.0:
            out.append(curve.frames[s])
        elif f >= 1.0:  # terminal sample: the target is the next frame itself
            out.append(curve.frames[s + 1])
        else:
            out.append(warp(curve.frames[s], scale_flow(curve.hop_flows[s], f)))
    return tuple(out)


def monoid_add(a: CurveFlowField, b: CurveFlowField) -> CurveFlowField:
    """Saturating sum min(h_a + h_b, reach): commutative, associative,
    zero_field is the identity and saturated_field absorbs."""
    if a.curve is not b.curve and not a.curve.same_geometry(b.curve):
        raise ValueError("fields live on different curves")
    if a.n_field != b.n_field:
        raise ValueError(f"field domains differ: {a.n_field} vs {b.n_field} samples")
    return CurveFlowField(a.curve, np.minimum(a.h + b.h, a.curve.radius[: a.n_field]))


def conjugate(field: CurveFlowField) -> CurveFlowField:
    """h -> reach - h; an involution swapping the zero and saturated fields."""
    return CurveFlowField(field.curve, field.curve.radius[: field.n_field] - field.h)


def field_gap(a: CurveFlowField, b: CurveFlowField) -> np.ndarray:
    """Per-sample arc distance between two fields' targets, e(t).

    Both targets of a sample lie on the curve, so the distance is the
    absolute difference of their target arcs; |h_a(t) - h_b(t)| can never
    exceed it.
    """
    if a.curve is not b.curve and not a.curve.same_geometry(b.curve):
        raise ValueError("fields live on different curves")
    if a.n_field != b.n_field:
        raise ValueError(f"field domains differ: {a.n_field} vs {b.n_field} samples")
    return np.abs(a.target_arcs() - b.target_arcs())


def approx_cost(motion: MotionFunction | CurveFlowField, level: float) -> float:
    """Integral of |h(t) - level| over the motion's time domain.

    h is taken piecewise linear between samples; segments where the sign
    changes are split at the exact crossing, so the value is that of the
    continuous integral, not a sample sum.
    """
    if isinstance(motion, CurveFlowField):
        motion = motion_of_field(motion)
    t = motion.times
    f = motion.values - float(level)
    if t.size == 1:
        return 0.0
    total = 0.0
    for k in range(t.size - 1):
        dt = t[k + 1] - t[k]
        a, b = f[k], f[k + 1]
        if a * b >= 0.0:
            total += 0.5 * (abs(a) + abs(b)) * dt
        else:
            tau = a / (a - b)  # distance to the zero crossing, normalized
            total += 0.5 * dt * (tau * abs(a) + (1.0 - tau) * abs(b))
    return float(total)


def time_weighted_median(times: np.ndarray, values: np.ndarray) -> float:
    """Level m minimizing the piecewise-linear integral of |v(t) - m|.

    Computed as the smallest level at which the time measure of
    {t : v(t) <= m} reaches half the domain, evaluated exactly on the
    piecewise-linear interpolant (flat segments contribute atoms, sloped
    segments grow the measure linearly in level).
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if t.ndim != 1 or t.shape != v.shape or t.size == 0:
        raise ValueError("times and values must be matching non-empty 1-d arrays")
    if t.size == 1:
        return float(v[0])
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    half = 0.5 * (t[-1] - t[0])

    def measure(level: float, with_atom: bool) -> float:
        """Time with v(t) <= level; flat segments at exactly ``level`` are
        atoms, included only when ``with_atom``."""
        acc = 0.0
        for k in range(t.size - 1):
            dt = t[k + 1] - t[k]
            lo, hi = sorted((v[k], v[k + 1]))
            if lo == hi:
                if level > lo or (with_atom and level == lo):
                    acc += dt
            elif level >= hi:
                acc += dt
            elif level > lo:
                acc += dt * (level - lo) / (hi - lo)
        return acc

    # Between consecutive sample values the measure is linear in the
    # level; at a sample value it may jump by an atom.  Scan candidates in
    # order: the optimum is either inside the first segment whose upper
    # limit-from-below reaches half time, or at the first atom crossing it.
    tol = 1e-15 * max(1.0, half)
    levels = np.unique(v)
    prev_level, prev_m = None, 0.0
    for lev in levels:
        below = measure(float(lev), with_atom=False)
        if below >= half - tol and prev_level is not None and below > prev_m:
            frac = min(1.0, max(0.0, (half - prev_m) / (below - prev_m)))
            return float(prev_level + frac * (lev - prev_level))
        full = measure(float(lev), with_atom=True)
        if full >= half - tol:
            return float(lev)
        prev_level, prev_m = float(lev), full
    return float(levels[-1])


@dataclass(frozen=True)
class ParallelApprox:
    field: CurveFlowField
    level: float
    median: float
    lower_bound: float


def best_parallel_approx(
    field: CurveFlowField, reach_tol: float = 0.05
) -> ParallelApprox:
    """Closest parallel field in time-integrated L1, for near-constant reach.

    The unconstrained optimum is the time-weighted median of h; it is
    clipped to the smallest reach on the domain so the result stays
    feasible.  Requires the reach spread over the domain to be within
    ``reach_tol`` of its maximum — on strongly pinched curves the clipped
    median is no longer optimal.
    """
    r = field.curve.radius[: field.n_field]
    rmax, rmin = float(r.max()), float(r.min())
    if rmax > 0 and (rmax - rmin) > reach_tol * rmax:
        raise ValueError(
            f"reach varies by {(rmax - rmin) / rmax:.1%} over the domain "
            f"(limit {reach_tol:.0%}); the clipped median is not optimal here"
        )
    med = time_weighted_median(field.domain_times, field.h)
    level = min(med, rmin)
    best = CurveFlowField(field.curve, np.full(field.n_field, level))
    return ParallelApprox(best, level, med, approx_cost(field, level))


@dataclass(frozen=True)
class QuantizedField:
    field: CurveFlowField
    index: int
    step: float
    error: float


def multiscale_quantize(field: CurveFlowField, n: int, k: int) -> QuantizedField:
    """Snap a parallel field to the nearest level of the k**n-step ladder.

    The ladder divides the (constant) reach r into k**n equal steps; ties
    round down, so refining the ladder (n -> n+1) never moves a level
    that already exists at the coarser scale.  Requires k >= 2, n >= 0, a
    parallel field, and constant reach over the domain.
    """
    if k < 2 or n < 0:
        raise ValueError(f"need k >= 2 and n >= 0, got k={k}, n={n}")
    if not is_parallel(field):
        raise ValueError("only parallel fields can be quantized")
    r = field.curve.radius[: field.n_field]
    rmax = float(r.max())
    if rmax - float(r.min()) > _REL_EPS * max(1.0, rmax):
        raise ValueError("quantization ladder needs constant reach over the domain")
    if rmax == 0.0:
        return QuantizedField(zero_field(field.curve, field.n_field), 0, 0.0, 0.0)
    delta = float(field.h[0])
    step = rmax / float(k**n)
    q = delta / step
    idx = int(np.floor(q + 0.5))
    if idx - q == 0.5:  # exact half: prefer the lower level
        idx -= 1
    idx = min(max(idx, 0), k**n)
    level = min(idx * step, rmax)
    out = CurveFlowField(field.curve, np.full(field.n_field, level))
    return QuantizedField(out, idx, step, abs(level - delta))


@dataclass(frozen=True)
class ResampledCurve:
    times: np.ndarray
    arcs: np.ndarray
    frames: tuple[Image, ...] | None
    leftover: float


def resample_uniform(curve: Curve, step: float) -> ResampledCurve:
    """Re-sample the curve at equal arc-length steps.

    Sample times solve arc(t) = m*step on the piecewise-linear arc by
    bisection; frames (when the curve has them) are realized by fractional
    hop warps.  The step must not exceed the reach of any sample that
    still has a full step of curve ahead of it, nor the curve length.
    Any terminal stretch shorter than a full step is dropped and reported
    as ``leftover``.
    """
    if not (np.isfinite(step) and step > 0.0):
        raise ValueError(f"step must be positive, got {step}")
    total = curve.length
    slack = _REL_EPS * max(1.0, total)
    if step > total + slack:
        raise ValueError(f"step {step:g} exceeds the curve length {total:g}")
    carriers = curve.arc + step <= total + slack
    reach = curve.radius[carriers]
    if reach.size and float(reach.min()) < step - slack:
        tight = int(np.flatnonzero(carriers)[np.argmin(reach)])
        raise ValueError(
            f"step {step:g} exceeds the transport reach {reach.min():g} "
            f"at sample {tight}"
        )
    n_out = int(np.floor(total / step + _REL_EPS)) + 1
    targets = np.arange(n_out) * step
    leftover = float(total - targets[-1])
    if leftover < _REL_EPS * max(1.0, total):
        leftover = 0.0

    t_lo, t_hi = float(curve.times[0]), float(curve.times[-1])
    times_out = np.empty(n_out)
    for m, a in enumerate(targets):
        if a <= 0.0:
            times_out[m] = t_lo
            continue
        if a >= total:
            times_out[m] = t_hi
            continue
        lo, hi = t_lo, t_hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.interp(mid, curve.times, curve.arc) < a:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, t_hi - t_lo):
                break
        times_out[m] = 0.5 * (lo + hi)

    frames_out: tuple[Image, ...] | None = None
    if curve.frames is not None and curve.hop_flows is not None:
        arc = curve.arc
        seg = np.clip(np.searchsorted(arc, targets, side="right") - 1, 0, arc.size - 2)
        frames = []
        for m in range(n_out):
            s = int(seg[m])
            frac = (targets[m] - arc[s]) / (arc[s + 1] - arc[s])
            if frac <= 0.0:
                frames.append(curve.frames[s])
            elif frac >= 1.0:
                frames.append(curve.frames[s + 1])
            else:
                frames.append(warp(curve.frames[s], scale_flow(curve.hop_flows[s], float(frac))))
        frames_out = tuple(frames)
    return ResampledCurve(times_out, targets, frames_out, leftover)

"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the three hot kernels (bilinear warp, Jacobi flow sweeps,
forward-backward residual) and one end-to-end flow estimate on both
backends, reports wall time and speedup, and checks that the backends
agree to floating-point rounding (they share the same evaluation
order, so the full pipeline is expected to match bit-exactly).

    python3 benchmarks/bench_kernels.py --size 256 --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ofmkit import backend
from ofmkit.flow import FlowConfig, estimate_flow
from ofmkit.scenes import crop_image, make_texture


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _kernel_cases(size: int, rng: np.random.Generator):
    img = make_texture(size, size, seed=1)
    vx = rng.normal(0.0, 1.5, (size, size))
    vy = rng.normal(0.0, 1.5, (size, size))
    ix = rng.normal(0.0, 0.1, (size, size))
    iy = rng.normal(0.0, 0.1, (size, size))
    t0 = rng.normal(0.0, 0.05, (size, size))
    denom = ix * ix + iy * iy + 0.04
    yield "warp_bilinear", lambda k: k.warp_bilinear(img, vx, vy, True)
    yield "hs_sweeps(60)", lambda k: k.hs_sweeps(ix, iy, t0, denom, vx, vy, 60)
    yield "fb_terms", lambda k: k.fb_terms(vx, vy, -vx, -vy)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="square image side")
    ap.add_argument("--repeats", type=int, default=5, help="best-of-N timing")
    args = ap.parse_args()

    rng = np.random.default_rng(7)
    tex = make_texture(args.size + 64, args.size + 64, seed=3)
    a = crop_image(tex, 30.0, 30.0, args.size, args.size)
    b = crop_image(tex, 33.0, 31.0, args.size, args.size)
    cfg = FlowConfig()

    rows = []
    worst = 0.0
    for name, call in _kernel_cases(args.size, rng):
        results = {}
        times = {}
        for backend_name in ("numpy", "numba"):
            backend.select(backend_name)
            kern = backend.kernels()
            call(kern)  # once untimed: numba compiles on first call
            times[backend_name] = _time(lambda: call(kern), args.repeats)
            results[backend_name] = call(kern)
        diff = max(
            float(np.abs(np.asarray(x) - np.asarray(y)).max())
            for x, y in zip(
                np.atleast_1d(results["numpy"]), np.atleast_1d(results["numba"])
            )
        )
        worst = max(worst, diff)
        rows.append((name, times["numpy"], times["numba"], diff))

    flows = {}
    times = {}
    for backend_name in ("numpy", "numba"):
        backend.select(backend_name)
        estimate_flow(a, b, cfg)  # warm-up / compile
        times[backend_name] = _time(lambda: estimate_flow(a, b, cfg), max(1, args.repeats // 2))
        flows[backend_name] = estimate_flow(a, b, cfg)
    diff = max(
        float(np.abs(flows["numpy"].vx - flows["numba"].vx).max()),
        float(np.abs(flows["numpy"].vy - flows["numba"].vy).max()),
    )
    worst = max(worst, diff)
    rows.append(("estimate_flow", times["numpy"], times["numba"], diff))

    print(f"size {args.size}x{args.size}, best of {args.repeats}")
    print(f"{'kernel':<16} {'numpy':>10} {'numba':>10} {'speedup':>8} {'max |diff|':>12}")
    for name, t_np, t_nb, d in rows:
        print(f"{name:<16} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>7.1f}x {d:>12.3e}")
    print(f"worst backend disagreement: {worst:.3e}")


if __name__ == "__main__":
    main()

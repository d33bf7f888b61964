"""Benchmark the compiled gauge-distance kernel against the numpy fallback.

Runs the same batches through both code paths (the fallback is forced per
call, no env fiddling needed) and reports per-point timings plus the max
disagreement in d, which should sit at solver-tolerance level.

Usage: python3 benchmarks/bench_kernels.py [--points 200000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from anisogeo import HAVE_COMPILED, kernel_name
from anisogeo._dispatch import edist_batch
from anisogeo.bodies import Ball, EllipsoidBody, VPolytope
from anisogeo.gauges import BallGauge, EllipsoidGauge, LpBallGauge
from anisogeo.metric import sample_box


def cases():
    cube = VPolytope([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)])
    hexagon = VPolytope([[np.cos(a), np.sin(a)]
                         for a in np.linspace(0, 2 * np.pi, 7)[:-1]])
    yield "cube / ball3", cube, BallGauge(1.0, 3)
    yield "hexagon / ellipse", hexagon, EllipsoidGauge([[4.0, 0.3], [0.3, 1.0]])
    yield "ellipsoid / lp4", EllipsoidBody(np.diag([1.44, 1.0, 0.64])), \
        LpBallGauge(4.0, [1.0, 0.9, 0.8])
    yield "ball / lp4 (2d)", Ball(np.zeros(2), 1.0), LpBallGauge(4.0, [1.0, 1.0])


def bench_one(body, gauge, X, repeat, **kw):
    times = {"compiled": [], "python": []}
    results = {}
    for label, force in (("compiled", False), ("python", True)):
        if label == "compiled" and not HAVE_COMPILED:
            continue
        for _ in range(repeat):
            t0 = time.perf_counter()
            out = edist_batch(body, gauge, X, force_py=force, **kw)
            times[label].append(time.perf_counter() - t0)
        results[label] = np.asarray(out["d"])
    return times, results


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"active kernel: {kernel_name()} (compiled available: {HAVE_COMPILED})")
    print(f"{'case':24s} {'compiled us/pt':>14s} {'python us/pt':>13s} "
          f"{'speedup':>8s} {'max |dd|':>10s}")
    for name, body, gauge in cases():
        lo, hi = sample_box(body, gauge, 1.5)
        X = rng.uniform(lo, hi, size=(args.points, body.n))
        times, results = bench_one(body, gauge, X, args.repeat)
        tp = min(times["python"]) / args.points * 1e6
        if HAVE_COMPILED:
            tc = min(times["compiled"]) / args.points * 1e6
            dd = float(np.max(np.abs(results["compiled"] - results["python"])))
            print(f"{name:24s} {tc:14.3f} {tp:13.3f} {tp / tc:8.1f} {dd:10.2e}")
        else:
            print(f"{name:24s} {'-':>14s} {tp:13.3f} {'-':>8s} {'-':>10s}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

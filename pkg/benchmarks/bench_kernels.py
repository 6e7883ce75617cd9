"""Time the numba and pure-numpy paths of each hot kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

The first jit call (compilation) is excluded; both paths must agree before
timings are reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from scenegraph_slam import kernels


def _cases(rng: np.random.Generator, scale: float):
    n = int(20000 * scale)
    pts = rng.uniform(-3, 3, size=(n, 3))
    pts[: n // 2, 2] = rng.normal(0.0, 0.01, n // 2)
    samples = np.stack([rng.choice(n, 3, replace=False) for _ in range(int(200 * scale))])
    yield "ransac_best_hypothesis", (lambda jit: kernels.ransac_best_hypothesis(pts, samples, 0.03, use_jit=jit))

    cloud = rng.uniform(0, 4, size=(int(200000 * scale), 3))
    yield "voxel_centroids", (lambda jit: kernels.voxel_centroids(cloud, 0.05, use_jit=jit))

    m = int(20000 * scale)
    seen = rng.uniform([0, 0, 0], [8, 6, 2.5], size=(m, 3))
    owner = rng.integers(-1, 12, size=m)
    panels = np.column_stack(
        [rng.uniform(0, 8, 12), rng.uniform(0, 6, 12), rng.uniform(0, 8, 12), rng.uniform(0, 6, 12),
         np.zeros(12), np.full(12, 2.5)]
    )
    cam = np.array([4.0, 3.0, 1.2])
    yield "occluded", (lambda jit: kernels.occluded(seen, owner, cam, panels, use_jit=jit))

    cells = rng.uniform(0, 10, size=(int(40000 * scale), 2))
    segs = rng.uniform(0, 10, size=(40, 4))
    yield "segment_clearance", (lambda jit: kernels.segment_clearance(cells, segs, use_jit=jit))


def _best_time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=0, atol=1e-9)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not kernels.JIT_ENABLED:
        print("numba disabled (SCENEGRAPH_SLAM_DISABLE_NUMBA); both columns run numpy")

    print(f"{'kernel':<24}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, fn in _cases(np.random.default_rng(args.seed), args.scale):
        fast, slow = fn(True), fn(False)  # warm-up also compiles
        if not _same(fast, slow):
            raise SystemExit(f"{name}: numba and numpy results disagree")
        tj = _best_time(lambda: fn(True), args.repeat)
        tn = _best_time(lambda: fn(False), args.repeat)
        print(f"{name:<24}{tj * 1e3:>10.2f}{tn * 1e3:>10.2f}{tn / tj:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

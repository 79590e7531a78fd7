"""Time the numba kernels against the pure-numpy path on the same inputs.

    python3 benchmarks/bench_backends.py [--dim 3] [--n 96] [--repeat 3]

Each kernel runs once per backend to warm up (numba compiles, numpy
allocates) and is then timed ``--repeat`` times; the best time is shown.
Outputs of the two backends are compared bit for bit.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from slrecon import _accel
from slrecon.cloud import ShapeSpec, sample_shape
from slrecon.distance import fast_sweep, seed_exact_distance
from slrecon.grid import ScalarField, build_grid, narrow_band
from slrecon.interp import interp_points
from slrecon.reinit import reinitialize


def best_of(fn, repeat):
    fn()
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, choices=(2, 3), default=3)
    ap.add_argument("--n", type=int, default=None, help="nodes per axis (default 400 in 2D, 96 in 3D)")
    ap.add_argument("--points", type=int, default=200_000, help="interpolation queries")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n = args.n or (400 if args.dim == 2 else 96)

    spec = ShapeSpec("circle" if args.dim == 2 else "sphere", 400 if args.dim == 2 else 2562)
    cloud = sample_shape(spec)
    dx = 3.0 / (n - 1)
    grid = build_grid((-1.5,) * args.dim, (1.5,) * args.dim, dx, 2)
    seeded = seed_exact_distance(grid, cloud)
    r = np.sqrt(sum(m * m for m in grid.mesh()))
    phi = ScalarField(grid, 3.0 * (r - 1.0))
    band = narrow_band(phi, (4 if args.dim == 2 else 6) * dx)
    pts = np.random.default_rng(0).uniform(grid.origin, grid.upper, size=(args.points, args.dim))

    kernels = {
        "fast sweep": lambda: fast_sweep(seeded).values,
        "interp q1": lambda: interp_points("q1", phi, pts),
        "interp weno": lambda: interp_points("weno", phi, pts),
        "reinit": lambda: reinitialize(phi, band).values,
    }
    print(f"grid {grid.dims} ({grid.size} nodes), {args.points} queries, numba threads {_accel.get_threads()}")
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}  same")
    for name, fn in kernels.items():
        res = {}
        for mode in ("numba", "numpy"):
            with _accel.using(mode):
                res[mode] = best_of(fn, args.repeat)
        (tn, a), (tp, b) = res["numba"], res["numpy"]
        print(f"{name:<14}{tn:>12.4f}{tp:>12.4f}{tp / tn:>9.1f}x  {np.array_equal(a, b)}")


if __name__ == "__main__":
    main()

"""Benchmark the compiled kernels against their pure-numpy fallbacks.

Run as ``python -m crdra.bench_kernels``.  Timings cover the scalar
best-user allocation kernel and the dual-uplink power fixed point; the
compiled path is warmed up first so JIT compilation is not measured.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import kernels


def _time(fn, *args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_scalar_alloc(L, K, seed, repeats):
    rng = np.random.default_rng(seed)
    g = rng.exponential(size=(L, K))
    b = 0.3 * rng.exponential(size=(L, K)) + 1e-6
    rows = []
    t_np = _time(kernels._scalar_best_user_alloc_np, g, b, repeats=repeats)
    rows.append(("numpy", t_np))
    if kernels.USE_NUMBA:
        kernels._scalar_best_user_alloc_nb(g, b)  # warm-up / JIT
        t_nb = _time(kernels._scalar_best_user_alloc_nb, g, b,
                     repeats=repeats)
        rows.append(("numba", t_nb))
    return rows


def bench_fixed_point(K, M, seed, repeats):
    rng = np.random.default_rng(seed)
    H = np.ascontiguousarray(
        (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M)))
        / np.sqrt(2.0))
    q0 = np.zeros(K)
    args = (H, 0.5, q0, 10_000, 1e-11, 1e9)
    rows = [("numpy", _time(kernels._uplink_fixed_point_loop, *args,
                            repeats=repeats))]
    if kernels.USE_NUMBA:
        kernels._uplink_fixed_point_nb(*args)  # warm-up / JIT
        rows.append(("numba", _time(kernels._uplink_fixed_point_nb, *args,
                                    repeats=repeats)))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="compare compiled and numpy kernel paths")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--alloc-dims", type=int, default=100_000,
                        help="fading dimensions L for the allocation kernel")
    parser.add_argument("--alloc-users", type=int, default=4)
    parser.add_argument("--fp-users", type=int, default=6)
    parser.add_argument("--fp-antennas", type=int, default=8)
    args = parser.parse_args(argv)

    print(f"compiled path active: {kernels.USE_NUMBA}")
    cases = [
        (f"scalar_best_user_alloc L={args.alloc_dims} K={args.alloc_users}",
         bench_scalar_alloc(args.alloc_dims, args.alloc_users, args.seed,
                            args.repeats)),
        (f"uplink_fixed_point K={args.fp_users} M={args.fp_antennas}",
         bench_fixed_point(args.fp_users, args.fp_antennas, args.seed,
                           args.repeats)),
    ]
    for name, rows in cases:
        print(f"\n{name}")
        base = dict(rows).get("numpy")
        for path, t in rows:
            speedup = f"  ({base / t:.1f}x vs numpy)" if path == "numba" else ""
            print(f"  {path:6s} {t * 1e3:10.3f} ms{speedup}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

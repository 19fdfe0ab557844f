"""Compare the numba and pure-numpy backends of the Volterra hot loops.

Usage:
    python benchmarks/bench_kernels.py [--repeat N] [--potential NAME]

Times ``solve_kernel`` (three marches plus kink corrections) and one
application of the integral operator on the solved grid, and checks that
the two backends agree.  The first numba call includes JIT compilation
(or a cache load) and is reported separately.
"""
import argparse
import time

import numpy as np

from scatlab import _accel, catalog, kernel


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--potential", default="two_step")
    args = ap.parse_args()
    if not _accel.numba_enabled():
        raise SystemExit("numba is unavailable or disabled (SCATLAB_DISABLE_NUMBA); nothing to compare")
    q = catalog.get(args.potential)

    t0 = time.perf_counter()
    kernel.solve_kernel(q, backend="numba")
    first = time.perf_counter() - t0

    rows = []
    sols = {}
    for backend in ("numba", "numpy"):
        t, kg = best_of(lambda: kernel.solve_kernel(q, backend=backend), args.repeat)
        sols[backend] = kg
        f = np.where(kg.mask, kg.L, 0.0)
        ta, _ = best_of(lambda: kernel.apply_V(kg, f, backend=backend), args.repeat)
        rows.append((backend, t, ta))

    diff = np.nanmax(np.abs(sols["numba"].L - sols["numpy"].L))
    n_xi, n_eta = sols["numba"].L.shape
    print(f"potential {args.potential}, grid {n_xi} x {n_eta} (marched at h, h/2, h/4)")
    print(f"first numba call (compile or cache load): {first:.3f} s")
    print(f"{'backend':<8} {'solve_kernel [s]':>17} {'apply_V [s]':>12}")
    for name, t, ta in rows:
        print(f"{name:<8} {t:>17.3f} {ta:>12.4f}")
    print(f"speedup solve {rows[1][1] / rows[0][1]:.1f}x, apply {rows[1][2] / rows[0][2]:.1f}x")
    print(f"max |L_numba - L_numpy| = {diff:.3e}")


if __name__ == "__main__":
    main()

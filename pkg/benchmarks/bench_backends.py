"""Throughput comparison of the compiled and numpy kernel backends.

Usage: python benchmarks/bench_backends.py [--sizes 16,32,64,128] [--reps 5]

Times one full Heun step (two guarded Euler stages) plus the per-step
monitor reductions, which is what the run loop executes, and reports
cell-updates per second for each backend plus the speedup.
"""

import argparse
import time

import numpy as np

from alarmtaxis.backend import get_backend

UNIT = (1.0,) * 17


def bench_backend(kern, nx, reps):
    rng = np.random.default_rng(7)
    shape = (nx, nx)
    u = np.ascontiguousarray(1.0 + 0.5 * rng.random(shape))
    v = np.ascontiguousarray(0.8 + 0.3 * rng.random(shape))
    w = np.ascontiguousarray(0.5 + 0.2 * rng.random(shape))
    inv_h = float(nx)
    dt = 0.4 * 0.25 / (inv_h * inv_h)
    steps = max(3, int(2e6 / (nx * nx)))
    best = float("inf")
    for _ in range(reps):
        uu, vv, ww = u.copy(), v.copy(), w.copy()
        t0 = time.perf_counter()
        for _ in range(steps):
            a = kern.euler_stage(uu, vv, ww, vv, ww, None, None, None, dt,
                                 inv_h, inv_h, *UNIT, True)
            b = kern.euler_stage(a[0], a[1], a[2], a[1], a[2], None, None, None, dt,
                                 inv_h, inv_h, *UNIT, True)
            uu = 0.5 * (uu + b[0])
            vv = 0.5 * (vv + b[1])
            ww = 0.5 * (ww + b[2])
            kern.monitor_sums(uu, vv, ww, vv, inv_h, inv_h, *UNIT)
        best = min(best, (time.perf_counter() - t0) / steps)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="16,32,64,128")
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = {}
    for name in ("python", "compiled"):
        try:
            backends[name] = get_backend(name)
        except Exception as exc:
            print(f"{name}: unavailable ({exc})")
    header = f"{'grid':>8} " + " ".join(f"{n + ' us/step':>18}" for n in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for nx in sizes:
        times = {name: bench_backend(kern, nx, args.reps) for name, kern in backends.items()}
        row = f"{nx:>6}^2 " + " ".join(f"{1e6 * times[n]:>18.1f}" for n in times)
        if len(times) == 2:
            row += f" {times['python'] / times['compiled']:>8.1f}x"
        print(row)
    if "compiled" in backends:
        nx = sizes[-1]
        cps = nx * nx / bench_backend(backends["compiled"], nx, 1)
        print(f"compiled backend: {cps / 1e6:.1f}M cell-updates/s at {nx}^2")


if __name__ == "__main__":
    main()

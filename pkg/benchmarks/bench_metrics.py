"""Time the metric hot kernels on the numba path against the pure-numpy path.

    python3 benchmarks/bench_metrics.py [--size 288] [--repeat 20]

Both paths are imported from the same module, so one process compares them; the
``SEANET_NUMBA`` switch only picks which one the public measures call.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from seanet.metrics import _kernels, e_measure, f_measure, s_measure
from seanet.metrics.measures import centroid


def bench(fn, repeat):
    fn()  # warm-up (numba compiles on first call)
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=288)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    pred = rng.random((args.size, args.size))
    gt = np.zeros_like(pred, dtype=bool)
    gt[args.size // 4: args.size // 2, args.size // 3: 2 * args.size // 3] = True
    q = _kernels.quantize(pred)
    cy, cx = centroid(gt)

    rows = [
        ("threshold_counts", lambda: _kernels.threshold_counts_numpy(q, gt),
         lambda: _kernels.threshold_counts_numba(q, gt)),
        ("quadrant_stats", lambda: _kernels.quadrant_stats_numpy(pred, gt, cy, cx),
         lambda: _kernels.quadrant_stats_numba(pred, gt, cy, cx)),
    ]
    print(f"{args.size}x{args.size} map, best of {args.repeat} (ms)")
    print(f"{'kernel':18s} {'numpy':>9s} {'numba':>9s} {'speedup':>8s}")
    for name, np_fn, nb_fn in rows:
        a, b = bench(np_fn, args.repeat), bench(nb_fn, args.repeat)
        print(f"{name:18s} {a:9.3f} {b:9.3f} {a / b:7.2f}x")
    full = bench(lambda: (f_measure(pred, gt), e_measure(pred, gt), s_measure(pred, gt)), args.repeat)
    print(f"F+E+S per image via active backend ({_kernels.backend()}): {full:.3f} ms")


if __name__ == "__main__":
    main()

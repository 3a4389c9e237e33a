"""Time each hot kernel under numba and under the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Both sides must return identical results; the script asserts that before
reporting timings.  Numba compile time is excluded by a warm-up call.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from hybridclust import _kernels as K
from hybridclust.gen import random_graph_metric


def _cases(rng):
    P = rng.uniform(0, 10, (40, 2))
    F = rng.uniform(0, 10, (18, 2))
    D_pf = np.sqrt(((P[:, None] - F[None]) ** 2).sum(-1))
    D_pp = np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1))
    M = random_graph_metric(rng, 60)
    deltas = rng.uniform(0.5, 3.0, 40)
    xs = np.linspace(0, 10, 300)
    return {
        "best_subset": (D_pf, 4, 0.5, 1.0),
        "best_subset_minmax": (D_pf, 4),
        "min_ratio_scan": (D_pf.T.copy(), deltas),
        "density_radii": (D_pp, 5.0, 0.3),
        "triangle_excess": (M,),
        "grid_minimax": (P[:8], deltas[:8], xs, xs),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True)


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    for name, case in _cases(np.random.default_rng(args.seed)).items():
        fast, slow = K.implementation(name, True), K.implementation(name, False)
        a, b = fast(*case), slow(*case)  # warm-up and agreement check
        assert _same(a, b), f"{name}: numba and numpy disagree"
        tf, ts = _time(fast, case, args.repeat), _time(slow, case, args.repeat)
        rows.append({"kernel": name, "numba_s": tf, "numpy_s": ts, "speedup": ts / tf if tf > 0 else float("inf")})
    print(f"{'kernel':<20} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for r in rows:
        print(f"{r['kernel']:<20} {r['numba_s']:>12.6f} {r['numpy_s']:>12.6f} {r['speedup']:>8.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())

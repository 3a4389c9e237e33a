"""Hot numeric kernels.

Every kernel has a numba implementation and a pure-numpy twin with the same
signature and the same tie-breaking.  ``HYBRIDCLUST_DISABLE_NUMBA=1`` (or a
missing numba install) selects the numpy path for the exported names; both
paths stay importable as ``<name>_numba`` / ``<name>_numpy`` so tests and the
benchmark can compare them.
"""

from __future__ import annotations

import os
from math import comb

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def _flag_disabled() -> bool:
    return os.environ.get("HYBRIDCLUST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _flag_disabled()

# absolute slack on every comparison against a derived threshold
TOL = 1e-9


# ---------------------------------------------------------------------------
# exhaustive k-subset search
# ---------------------------------------------------------------------------

@njit(cache=True)
def _powered_cost(D, idx, k, r, z):
    n = D.shape[0]
    total = 0.0
    for p in range(n):
        best = D[p, idx[0]]
        for t in range(1, k):
            v = D[p, idx[t]]
            if v < best:
                best = v
        s = best - r
        if s > 0.0:
            if z == 1.0:
                total += s
            else:
                total += s ** z
    return total


@njit(cache=True)
def _max_nearest(D, idx, k):
    n = D.shape[0]
    worst = 0.0
    for p in range(n):
        best = D[p, idx[0]]
        for t in range(1, k):
            v = D[p, idx[t]]
            if v < best:
                best = v
        if best > worst:
            worst = best
    return worst


@njit(cache=True)
def _advance(idx, k, m):
    # lexicographic successor of a k-combination of range(m); False when exhausted
    i = k - 1
    while i >= 0 and idx[i] == m - k + i:
        i -= 1
    if i < 0:
        return False
    idx[i] += 1
    for j in range(i + 1, k):
        idx[j] = idx[j - 1] + 1
    return True


@njit(cache=True)
def best_subset_numba(D, k, r, z):
    m = D.shape[1]
    idx = np.arange(k)
    best_idx = idx.copy()
    best = np.inf
    count = 0
    while True:
        c = _powered_cost(D, idx, k, r, z)
        count += 1
        if c < best:
            best = c
            best_idx[:] = idx
        if not _advance(idx, k, m):
            break
    return best, best_idx, count


@njit(cache=True)
def best_subset_minmax_numba(D, k):
    m = D.shape[1]
    idx = np.arange(k)
    best_idx = idx.copy()
    best = np.inf
    count = 0
    while True:
        c = _max_nearest(D, idx, k)
        count += 1
        if c < best:
            best = c
            best_idx[:] = idx
        if not _advance(idx, k, m):
            break
    return best, best_idx, count


def _combination_blocks(m, k, block=4096):
    idx = np.arange(k)
    buf = []
    while True:
        buf.append(idx.copy())
        if len(buf) == block:
            yield np.array(buf)
            buf = []
        i = k - 1
        while i >= 0 and idx[i] == m - k + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        idx[i + 1:] = idx[i] + np.arange(1, k - i)
    if buf:
        yield np.array(buf)


def best_subset_numpy(D, k, r, z):
    m = D.shape[1]
    best, best_idx, count = np.inf, np.arange(k), 0
    for subsets in _combination_blocks(m, k):
        nearest = D[:, subsets].min(axis=2)  # (n, C)
        slack = np.maximum(nearest - r, 0.0)
        if z != 1.0:
            slack = slack ** z
        # sequential accumulation keeps the float sums identical to the numba loop
        costs = np.zeros(slack.shape[1])
        for row in slack:
            costs += row
        j = int(np.argmin(costs))
        count += len(subsets)
        if costs[j] < best:
            best, best_idx = float(costs[j]), subsets[j].copy()
    return best, best_idx, count


def best_subset_minmax_numpy(D, k):
    m = D.shape[1]
    best, best_idx, count = np.inf, np.arange(k), 0
    for subsets in _combination_blocks(m, k):
        radii = D[:, subsets].min(axis=2).max(axis=0)
        j = int(np.argmin(radii))
        count += len(subsets)
        if radii[j] < best:
            best, best_idx = float(radii[j]), subsets[j].copy()
    return best, best_idx, count


# ---------------------------------------------------------------------------
# discrete ball intersection: facility minimizing the worst request ratio
# ---------------------------------------------------------------------------

@njit(cache=True)
def min_ratio_scan_numba(D_fq, deltas):
    m, q = D_fq.shape
    best = np.inf
    best_i = -1
    for i in range(m):
        worst = 0.0
        for j in range(q):
            v = D_fq[i, j] / deltas[j]
            if v > worst:
                worst = v
                if worst >= best:
                    break
        if worst < best:
            best = worst
            best_i = i
    return best_i, best


def min_ratio_scan_numpy(D_fq, deltas):
    ratios = (D_fq / deltas[None, :]).max(axis=1)
    i = int(np.argmin(ratios))
    return i, float(ratios[i])


# ---------------------------------------------------------------------------
# density radii behind the per-client upper bounds
# ---------------------------------------------------------------------------

@njit(cache=True)
def density_radii_numba(D_pp, G, r):
    n = D_pp.shape[0]
    lower = r * (1.0 + TOL)
    out = np.full(n, np.nan)
    cand = np.empty(2 * n + 1)
    for p in range(n):
        dist = np.sort(D_pp[p])
        c = 0
        if lower > 0.0:
            cand[c] = lower
            c += 1
        for q in range(n):
            if dist[q] >= lower and dist[q] > 0.0:
                cand[c] = dist[q]
                c += 1
        for i in range(1, n + 1):
            g = G / i
            if g >= lower and g > 0.0:
                cand[c] = g
                c += 1
        cs = np.sort(cand[:c])
        for t in range(c):
            a = cs[t]
            cnt = np.searchsorted(dist, a, side="right")
            if cnt >= G / a - TOL:
                out[p] = a
                break
    return out


def density_radii_numpy(D_pp, G, r):
    n = D_pp.shape[0]
    lower = r * (1.0 + TOL)
    out = np.full(n, np.nan)
    shares = G / np.arange(1, n + 1)
    for p in range(n):
        dist = np.sort(D_pp[p])
        parts = [dist[(dist >= lower) & (dist > 0.0)], shares[(shares >= lower) & (shares > 0.0)]]
        if lower > 0.0:
            parts.insert(0, np.array([lower]))
        cs = np.sort(np.concatenate(parts))
        counts = np.searchsorted(dist, cs, side="right")
        ok = np.nonzero(counts >= G / cs - TOL)[0]
        if len(ok):
            out[p] = cs[ok[0]]
    return out


# ---------------------------------------------------------------------------
# metric validation
# ---------------------------------------------------------------------------

@njit(cache=True)
def triangle_excess_numba(D):
    N = D.shape[0]
    worst = 0.0
    for a in range(N):
        for b in range(N):
            dab = D[a, b]
            for c in range(N):
                e = D[a, c] - (dab + D[b, c])
                if e > worst:
                    worst = e
    return worst


def triangle_excess_numpy(D):
    worst = 0.0
    for b in range(D.shape[0]):
        e = D - (D[:, b, None] + D[None, b, :])
        worst = max(worst, float(e.max()))
    return worst


# ---------------------------------------------------------------------------
# planar grid search for the weighted minimax point
# ---------------------------------------------------------------------------

@njit(cache=True)
def grid_minimax_numba(points, radii, xs, ys):
    q = points.shape[0]
    best = np.inf
    bx = 0.0
    by = 0.0
    for i in range(xs.shape[0]):
        x = xs[i]
        for j in range(ys.shape[0]):
            y = ys[j]
            worst = 0.0
            for t in range(q):
                dx = x - points[t, 0]
                dy = y - points[t, 1]
                v = np.sqrt(dx * dx + dy * dy) / radii[t]
                if v > worst:
                    worst = v
                    if worst >= best:
                        break
            if worst < best:
                best = worst
                bx = x
                by = y
    return best, bx, by


def grid_minimax_numpy(points, radii, xs, ys):
    best, bx, by = np.inf, 0.0, 0.0
    Y = ys[None, :]
    for i in range(xs.shape[0]):
        x = xs[i]
        worst = np.zeros(ys.shape[0])
        for t in range(points.shape[0]):
            v = np.sqrt((x - points[t, 0]) ** 2 + (Y[0] - points[t, 1]) ** 2) / radii[t]
            np.maximum(worst, v, out=worst)
        j = int(np.argmin(worst))
        if worst[j] < best:
            best, bx, by = float(worst[j]), float(x), float(ys[j])
    return best, bx, by


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_PAIRS = {
    "best_subset": (best_subset_numba, best_subset_numpy),
    "best_subset_minmax": (best_subset_minmax_numba, best_subset_minmax_numpy),
    "min_ratio_scan": (min_ratio_scan_numba, min_ratio_scan_numpy),
    "density_radii": (density_radii_numba, density_radii_numpy),
    "triangle_excess": (triangle_excess_numba, triangle_excess_numpy),
    "grid_minimax": (grid_minimax_numba, grid_minimax_numpy),
}


def implementation(name: str, use_numba: bool | None = None):
    """Return one side of a kernel pair; ``None`` follows the env flag."""
    fast, slow = _PAIRS[name]
    if use_numba is None:
        use_numba = USE_NUMBA
    return fast if (use_numba and HAVE_NUMBA) else slow


def best_subset(D, k, r, z):
    D = np.ascontiguousarray(D, dtype=np.float64)
    best, idx, count = implementation("best_subset")(D, int(k), float(r), float(z))
    return float(best), [int(i) for i in idx], int(count)


def best_subset_minmax(D, k):
    D = np.ascontiguousarray(D, dtype=np.float64)
    best, idx, count = implementation("best_subset_minmax")(D, int(k))
    return float(best), [int(i) for i in idx], int(count)


def min_ratio_scan(D_fq, deltas):
    D_fq = np.ascontiguousarray(D_fq, dtype=np.float64)
    deltas = np.ascontiguousarray(deltas, dtype=np.float64)
    i, ratio = implementation("min_ratio_scan")(D_fq, deltas)
    return int(i), float(ratio)


def density_radii(D_pp, G, r):
    D_pp = np.ascontiguousarray(D_pp, dtype=np.float64)
    return implementation("density_radii")(D_pp, float(G), float(r))


def triangle_excess(D):
    D = np.ascontiguousarray(D, dtype=np.float64)
    return float(implementation("triangle_excess")(D))


def grid_minimax(points, radii, xs, ys):
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (points, radii, xs, ys)]
    best, bx, by = implementation("grid_minimax")(*args)
    return float(best), np.array([bx, by])


def n_subsets(m: int, k: int) -> int:
    return comb(m, min(k, m))

"""Weighted coresets for the hybrid objective.

Rings of doubling radius around every anchor of ``T`` are cut into greedy-net
cells whose radius grows with the ring.  Each client joins the smallest ring
that contains it.  Every nonempty cell keeps one client weighted by the
number of clients it stands for.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import TOL
from .metric import MetricSpace, WeightedClientSet, cost

log = logging.getLogger(__name__)

ANALYTIC_ALPHA = 36.0


@dataclass
class AnchorSet:
    points: list  # global point indices (P ∪ F) or coordinate vectors
    alpha_bound: float
    gamma_bound: int
    measured_cost: float = 0.0
    opt_lower: float | None = None

    def __post_init__(self):
        if not self.points:
            raise ValueError("anchor set is empty")
        if not self.alpha_bound >= 1:
            raise ValueError("alpha_bound must be >= 1")


@dataclass
class CoresetOutput(WeightedClientSet):
    alpha: float = 1.0
    R: float = 0.0
    uncovered: int = 0  # clients clamped into an outermost ring


def net_decompose(space: MetricSpace, center, big_radius: float, small_radius: float, *, members=None):
    """Greedy net over the clients of ball(center, big_radius).

    Returns ``[(net_point, [clients...]), ...]``; the lowest-index unassigned
    client opens each cell and absorbs every unassigned client within
    ``small_radius``.  ``members`` overrides the client list (already sorted).
    """
    if not 0 < small_radius <= big_radius:
        raise ValueError("need 0 < small_radius <= big_radius")
    if members is None:
        members = np.nonzero(space.dists_from(center) <= big_radius)[0]
    return _greedy_net(space.client_client, np.asarray(members, dtype=np.int64), small_radius)


def _greedy_net(D, members, radius):
    cells = []
    left = np.ones(len(members), dtype=bool)
    for a in range(len(members)):
        if not left[a]:
            continue
        q = members[a]
        grab = left & (D[q, members] <= radius)
        cells.append((int(q), [int(x) for x in members[grab]]))
        left &= ~grab
    return cells


# ---------------------------------------------------------------------------
# anchor set T
# ---------------------------------------------------------------------------

def _base_centers(space: MetricSpace, k: int, r: float, seed: int, repetitions: int):
    from .solver import NoSolutionFound, SolverConfig, solve

    try:
        res = solve(space, k, r, 0.99, SolverConfig(epsilon=0.99, repetitions=repetitions, seed=seed), diagnose=False)
        return list(res.solution.centers), "solver"
    except NoSolutionFound:
        return greedy_kcenter(space, k), "greedy-kcenter"


def greedy_kcenter(space: MetricSpace, k: int) -> list:
    """Farthest-first seeding over facilities (over clients for continuous F)."""
    if space.continuous:
        D, pts = space.client_client, space.client_coords()
    else:
        D, pts = space.client_facility, None
    first = int(np.argmin(D.max(axis=0)))
    chosen = [first]
    near = D[:, first].copy()
    while len(chosen) < min(k, D.shape[1]):
        p = int(np.argmax(near))
        if near[p] <= 0:
            break
        j = int(np.argmin(D[p])) if pts is None else p
        if j in chosen:
            break
        chosen.append(j)
        near = np.minimum(near, D[:, j])
    return [pts[j].copy() for j in chosen] if pts is not None else chosen


def build_T(space: MetricSpace, k: int, r: float, *, opt_cost: float | None = None, seed: int = 0,
            repetitions: int = 20, base=None) -> AnchorSet:
    """Anchor set: base centers plus an r/2 net of P ∪ F inside ball(a, 12r) for each base center a.

    ``alpha_bound`` is the measured ratio cost_r(P, T) / opt_cost when the
    optimum is supplied; otherwise the ratio against :func:`opt_lower_bound`,
    falling back to the analytic constant when that bound is zero.
    """
    if base is None:
        base, origin = _base_centers(space, k, r, seed, repetitions)
    else:
        origin = "given"
    anchors = [space.facility_point(c) for c in base]
    T = list(anchors)
    if r > 0:
        for a in anchors:
            T.extend(_net_points(space, a, 12 * r, r / 2))
    T = _dedupe(T)
    c = float(np.maximum(anchor_distances(space, T).min(axis=1) - r, 0.0).sum())
    lower = opt_cost if opt_cost is not None else opt_lower_bound(space, k, r)
    if c <= 0:
        alpha = 1.0
    elif lower and lower > 0:
        alpha = max(1.0, c / lower)
    else:
        alpha = ANALYTIC_ALPHA
    log.debug("anchor set from %s: |T|=%d cost=%g alpha=%g", origin, len(T), c, alpha)
    return AnchorSet(T, alpha, max(1, math.ceil(len(T) / k)), measured_cost=c, opt_lower=lower)


def _net_points(space, a, big, small):
    """Greedy net over every point of P ∪ F (clients only for continuous F) inside ball(a, big)."""
    if space.continuous:
        members = np.nonzero(space.dists_from(a) <= big)[0]
        return [q for q, _ in _greedy_net(space.client_client, members, small)]
    row = space.all_points_block([a])[0] if not isinstance(a, np.ndarray) else _coord_row(space, a)
    members = np.nonzero(row <= big)[0]
    if not len(members):
        return []
    block = space.all_points_block(members)[:, members]
    out, left = [], np.ones(len(members), dtype=bool)
    for i in range(len(members)):
        if left[i]:
            out.append(int(members[i]))
            left &= ~(block[i] <= small)
    return out


def _coord_row(space, x):
    pts = np.vstack([space.client_coords(), space.facility_coords()])
    return np.sqrt(((pts - x[None, :]) ** 2).sum(axis=1))


def _dedupe(points):
    seen, out = set(), []
    for p in points:
        key = tuple(np.round(p, 12)) if isinstance(p, np.ndarray) else int(p)
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


def anchor_distances(space: MetricSpace, T) -> np.ndarray:
    """(n, |T|) client-to-anchor distances."""
    return np.column_stack([space.dists_from(t) for t in T])


def opt_lower_bound(space: MetricSpace, k: int, r: float) -> float:
    from .solver import cost_lower_bound

    return cost_lower_bound(space, k, r, 1.0)


# ---------------------------------------------------------------------------
# coreset
# ---------------------------------------------------------------------------

def build_coreset(space: MetricSpace, k: int, r: float, epsilon: float, T: AnchorSet) -> CoresetOutput:
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    n = space.n
    alpha = float(T.alpha_bound)
    DT = anchor_distances(space, T.points)
    total = float(np.maximum(DT.min(axis=1) - r, 0.0).sum())
    if total <= 0:
        return _degenerate(space, r, epsilon, alpha, DT)

    R = total / (alpha * n)
    jmax = math.ceil(2 * math.log2(math.ceil(alpha * n)))
    # smallest ring 2^j R holding each client: min over anchors, ties to the lowest anchor index
    with np.errstate(divide="ignore"):
        need = np.ceil(np.log2(np.maximum(DT, 0.0) / R) - TOL)
    need = np.maximum(need, 0)
    # guard against log rounding: bump j until the ring really contains the point
    need = np.where(DT <= (2.0 ** need) * R, need, need + 1)
    level = need.min(axis=1)
    anchor = np.argmin(need, axis=1)
    uncovered = level > jmax
    if uncovered.any():
        log.warning("%d clients lie beyond the outermost ring; clamped to it", int(uncovered.sum()))
    level = np.minimum(level, jmax).astype(np.int64)

    members = []
    for i in range(len(T.points)):
        for j in range(jmax + 1):
            assoc = np.nonzero((anchor == i) & (level == j))[0]
            if not len(assoc):
                continue
            ball_r = (2.0 ** j) * R
            in_ball = np.nonzero(DT[:, i] <= ball_r)[0]
            cell_r = epsilon * ball_r / (4 * alpha)
            owner = _cell_owner(space, in_ball, assoc, cell_r)
            for _, group in sorted(_group(assoc, owner).items()):
                members.append((int(group[0]), len(group)))
    members.sort()
    out = CoresetOutput(members=members, alpha=alpha, R=R, uncovered=int(uncovered.sum()))
    assert out.total_weight == n
    return out


def _cell_owner(space, in_ball, assoc, cell_r):
    """Net cell of each associated client inside the greedy net of the ring ball.

    Clamped clients that fall outside the ball open extra cells after the
    ball's own net.
    """
    D = space.client_client
    extra = np.setdiff1d(assoc, in_ball)
    members = np.concatenate([in_ball, extra]) if len(extra) else in_ball
    cells = _greedy_net(D, members, cell_r)
    owner = {}
    for c, (_, group) in enumerate(cells):
        for p in group:
            owner[p] = c
    return np.array([owner[p] for p in assoc])


def _group(items, keys):
    out: dict = {}
    for p, c in zip(items, keys):
        out.setdefault(int(c), []).append(int(p))
    return out


def _degenerate(space, r, epsilon, alpha, DT) -> CoresetOutput:
    """Zero-cost anchors: nets of radius eps r / (4 alpha) around each anchor."""
    n = space.n
    if r <= 0:
        # every client sits on an anchor; merge exact duplicates only
        D = space.client_client
        cells = _greedy_net(D, np.arange(n), 0.0)
        members = sorted((int(g[0]), len(g)) for _, g in cells)
        return CoresetOutput(members=members, alpha=alpha, R=0.0)
    cell_r = max(epsilon * r / (4 * alpha), np.finfo(float).tiny)
    anchor = np.argmin(DT, axis=1)
    members = []
    for i in np.unique(anchor):
        assoc = np.nonzero(anchor == i)[0]
        for _, group in _greedy_net(space.client_client, assoc, cell_r):
            members.append((int(group[0]), len(group)))
    members.sort()
    return CoresetOutput(members=members, alpha=alpha, R=0.0)


def coreset_error(space: MetricSpace, cs: WeightedClientSet, X, r: float) -> tuple[float, float]:
    """(|wcost - cost|, cost) for one solution."""
    c = cost(space, None, X, r)
    w = cost(space, cs, X, r)
    return abs(w - c), c


def certify(space: MetricSpace, cs: WeightedClientSet, k: int, r: float, epsilon: float) -> dict:
    """Exhaustive check of |wcost - cost| <= eps * cost over every X ⊆ F with 1 <= |X| <= k."""
    from itertools import combinations

    near_all = space.client_facility
    idx, w = cs.indices, cs.weights
    worst, violations, checked = 0.0, 0, 0
    for size in range(1, min(k, space.m) + 1):
        for X in combinations(range(space.m), size):
            near = near_all[:, X].min(axis=1)
            c = float(np.maximum(near - r, 0.0).sum())
            wc = float((w * np.maximum(near[idx] - r, 0.0)).sum())
            err = abs(wc - c)
            checked += 1
            if c > 0:
                worst = max(worst, err / c)
                if err > epsilon * c + TOL:
                    violations += 1
            elif wc > TOL:
                violations += 1
                worst = math.inf
    return {"checked": checked, "violations": violations, "max_relative_error": worst}

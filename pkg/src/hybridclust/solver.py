"""Randomized bicriteria approximation scheme for hybrid k-clustering.

One run works against a fixed guess ``G`` of the optimum: it seeds one
request per greedily marked client, then repeatedly samples a badly served
client (from the nearby or faraway pool, chosen by a fair coin), guesses its
cluster index, and tightens that cluster's request set until the inflated
cost drops below ``(1 + eps) * G`` or the ball-intersection call fails.
:func:`solve` wraps runs in a geometric search over ``G`` with independent
repetitions.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._kernels import TOL
from .ballint import BudgetExceeded, Infeasible, RequestSet, solve as ball_solve
from .metric import MetricSpace, Solution, alpha_distance, cost_from_nearest

log = logging.getLogger(__name__)

# reasons a single run can end without a solution
BALL_FAIL = "ball-intersection-fail"
BALL_BUDGET = "ball-intersection-budget"
EMPTY_SAMPLE = "empty-sample-set"
ITERATION_CAP = "iteration-cap"
TOO_MANY_MARKS = "too-many-marks"
GUESS_TOO_LARGE = "guess-too-large"


class GuessTooLarge(ValueError):
    pass


class NoSolutionFound(RuntimeError):
    def __init__(self, report: dict):
        super().__init__("every guess failed")
        self.report = report


class RunFailure(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def default_iteration_cap(k: int, epsilon: float) -> int:
    ke = k / epsilon
    return math.ceil(40 * ke * math.log(ke + math.e) * 100)


@dataclass
class SolverConfig:
    epsilon: float
    iteration_cap: Optional[int] = None
    repetitions: int = 50
    seed: int = 0
    guess_multiplier: Optional[float] = None
    guess: Optional[float] = None  # pin a single G instead of searching
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.iteration_cap is not None and self.iteration_cap < 1:
            raise ValueError("iteration_cap must be >= 1")
        if self.guess_multiplier is None:
            self.guess_multiplier = 1 + self.epsilon / 3
        if not self.guess_multiplier > 1:
            raise ValueError("guess_multiplier must be > 1")

    def cap(self, k: int) -> int:
        return self.iteration_cap or default_iteration_cap(k, self.epsilon)


@dataclass
class IterationRecord:
    iteration: int
    branch: str  # "nearby" | "faraway"
    point: Optional[int]
    index: Optional[int]
    dist: Optional[float]  # d(p, X) before the update
    delta: Optional[float]
    accepted: bool
    center_before: object = None
    note: str = ""

    def to_json(self) -> dict:
        c = self.center_before
        return {
            "iteration": self.iteration,
            "branch": self.branch,
            "point": self.point,
            "index": self.index,
            "dist": self.dist,
            "delta": self.delta,
            "accepted": self.accepted,
            "center_before": c.tolist() if isinstance(c, np.ndarray) else c,
            "note": self.note,
        }


@dataclass
class SolverState:
    X: list  # per cluster: facility index / coordinates, or None while Q_i is empty
    Q: list[RequestSet]
    rng: np.random.Generator
    u: np.ndarray
    marked: list[int]
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def centers(self) -> list:
        return [x for x in self.X if x is not None]


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def compute_upper_bounds(space: MetricSpace, G: float, r: float) -> np.ndarray:
    """u(p) = 3 * min{alpha > r : |ball(p, alpha)| >= G / alpha} for every client."""
    if not G > 0:
        raise ValueError("G must be > 0")
    alpha = _kernels.density_radii(space.client_client, G, r)
    if np.any(np.isnan(alpha)):
        raise GuessTooLarge(f"no density radius satisfies G={G:g}")
    return 3.0 * alpha


def greedy_mark(space: MetricSpace, u: np.ndarray) -> list[int]:
    D = space.client_client
    order = sorted(range(space.n), key=lambda p: (u[p], p))
    marked: list[int] = []
    for p in order:
        if all(D[p, q] > u[p] + u[q] for q in marked):
            marked.append(p)
    return marked


def initialize(space: MetricSpace, marked, u, k: int, epsilon: float, seed=None, eta: float | None = None) -> SolverState:
    if len(marked) > k:
        raise RunFailure(TOO_MANY_MARKS)
    eta = epsilon / 40 if eta is None else eta
    Q = [RequestSet() for _ in range(k)]
    X: list = [None] * k
    for i, p in enumerate(marked):
        Q[i].add(p, float(u[p]))
        X[i] = _ball_call(space, Q[i], eta)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SolverState(X=X, Q=Q, rng=rng, u=np.asarray(u, dtype=np.float64), marked=list(marked))


def _ball_call(space, Q, eta):
    try:
        return ball_solve(space, Q, eta)
    except Infeasible:
        raise RunFailure(BALL_FAIL) from None
    except BudgetExceeded:
        raise RunFailure(BALL_BUDGET) from None


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

def _sampling_mass(near, r_prime, z, weights):
    slack = alpha_distance(near, r_prime)
    mass = slack if z == 1.0 else slack ** z
    if weights is not None:
        mass = mass * weights
    return mass


def _draw(rng, mass) -> Optional[int]:
    cum = np.cumsum(mass)
    total = cum[-1] if len(cum) else 0.0
    if not total > 0:
        return None
    j = int(np.searchsorted(cum, rng.random() * total, side="right"))
    return min(j, len(cum) - 1)


def iterate(state: SolverState, space: MetricSpace, k: int, r: float, epsilon: float, G: float,
            z: float = 1.0, weights=None, near=None) -> SolverState:
    """One pass of the loop body; raises :class:`RunFailure` on failure.

    ``weights`` multiplies the sampling mass per client.  ``near`` may carry a
    precomputed d(p, X) vector.
    """
    rng = state.rng
    r_prime = r * (1 + epsilon / 3)
    if near is None:
        near = space.nearest(state.centers)
    it = len(state.trace)
    mass = _sampling_mass(near, r_prime, z, weights)
    if rng.random() < 0.5:
        branch = "nearby"
        pool = near <= 8 * r / epsilon + TOL
    else:
        branch = "faraway"
        pool = alpha_distance(near, r_prime) > epsilon / (1000 * k) * state.u
    p = _draw(rng, np.where(pool, mass, 0.0))
    if p is None:
        state.trace.append(IterationRecord(it, branch, None, None, None, None, False, note=EMPTY_SAMPLE))
        raise RunFailure(EMPTY_SAMPLE)
    i = int(rng.integers(k))
    d = float(near[p])
    delta = d / (1 + epsilon / 12)
    before = state.X[i]
    state.Q[i].add(p, delta)
    try:
        state.X[i] = _ball_call(space, state.Q[i], epsilon / 40)
    except RunFailure as exc:
        # roll back so x_i still satisfies every request in Q_i
        state.Q[i].requests.pop()
        state.trace.append(IterationRecord(it, branch, int(p), i, d, delta, False, before, exc.reason))
        raise
    state.trace.append(IterationRecord(it, branch, int(p), i, d, delta, True, before))
    return state


@dataclass
class GuessOutcome:
    G: float
    solution: Optional[Solution]
    reason: Optional[str] = None
    cost: Optional[float] = None  # at radius (1 + eps/3) r
    cost_full_radius: Optional[float] = None  # at radius (1 + eps) r
    iterations: int = 0
    nearby: int = 0
    faraway: int = 0
    seed: tuple = ()
    trace: list = field(default_factory=list)
    state: Optional[SolverState] = None

    @property
    def ok(self) -> bool:
        return self.solution is not None

    def record(self) -> dict:
        return {
            "seed": list(self.seed),
            "status": "solution" if self.ok else "failed",
            "reason": self.reason,
            "cost": self.cost,
            "iterations": self.iterations,
            "nearby": self.nearby,
            "faraway": self.faraway,
        }


def run_single(space: MetricSpace, k: int, r: float, epsilon: float, G: float, seed=0,
               iteration_cap: int | None = None, z: float = 1.0, *, u=None, marked=None,
               weights=None) -> GuessOutcome:
    """One randomized run against the guess ``G``."""
    seed_key = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    cap = iteration_cap or default_iteration_cap(k, epsilon)
    r_prime = r * (1 + epsilon / 3)
    out = GuessOutcome(G=G, solution=None, seed=seed_key)
    try:
        if u is None:
            u = compute_upper_bounds(space, G, r)
        if marked is None:
            marked = greedy_mark(space, u)
        state = initialize(space, marked, u, k, epsilon, seed=_rng(seed))
    except GuessTooLarge:
        out.reason = GUESS_TOO_LARGE
        return out
    except RunFailure as exc:
        out.reason = exc.reason
        return out
    out.state = state
    # for z > 1 the sampling follows the gradient direction d^(z-1) of the l_z norm
    try:
        while True:
            near = space.nearest(state.centers)
            c = cost_from_nearest(near, None, r_prime, z)
            if c <= (1 + epsilon) * G:
                out.solution = Solution(list(state.centers))
                out.cost = c
                out.cost_full_radius = cost_from_nearest(near, None, r * (1 + epsilon), z)
                break
            if len(state.trace) >= cap:
                out.reason = ITERATION_CAP
                break
            iterate(state, space, k, r, epsilon, G, z=z, weights=weights, near=near)
    except RunFailure as exc:
        out.reason = exc.reason
    out.trace = state.trace
    out.iterations = len(state.trace)
    out.nearby = sum(t.branch == "nearby" for t in state.trace)
    out.faraway = out.iterations - out.nearby
    return out


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        master, *key = seed
        return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(int(x) for x in key)))
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


# ---------------------------------------------------------------------------
# guess search driver
# ---------------------------------------------------------------------------

def one_center_cost(space: MetricSpace, r: float, z: float = 1.0):
    """Cheapest single center and its cost (clients stand in for R^dim)."""
    table = space.client_client if space.continuous else space.client_facility
    slack = np.maximum(table - r, 0.0)
    costs = (slack if z == 1.0 else slack ** z).sum(axis=0)
    j = int(np.argmin(costs))
    center = space.client_coords()[j].copy() if space.continuous else j
    return center, float(costs[j])


def cost_lower_bound(space: MetricSpace, k: int, r: float, z: float = 1.0, *, assume_positive: bool = False) -> float:
    """A certified lower bound on the optimum.

    Maximum of: every client paying its distance to the closest facility, and
    a packing bound over k+1 farthest-first clients, two of which must share a
    center.  With ``assume_positive`` the smallest positive single-client
    r-distance (discrete facilities only) is added; that bound holds only
    when OPT > 0, so callers must cover the zero case separately.
    """
    bounds = [0.0]
    if not space.continuous:
        slack = np.maximum(space.client_facility - r, 0.0)
        per_client = slack.min(axis=1)
        bounds.append(float((per_client ** z).sum()))
        pos = slack[slack > 0]
        if assume_positive and pos.size:
            bounds.append(float(pos.min()) ** z)
    if space.n > k:
        D = space.client_client
        chosen = [0]
        dmin = D[0].copy()
        while len(chosen) < k + 1:
            j = int(np.argmax(dmin))
            chosen.append(j)
            dmin = np.minimum(dmin, D[j])
        sub = D[np.ix_(chosen, chosen)]
        pair = float(sub[np.triu_indices(len(chosen), 1)].min())
        bounds.append(2.0 ** (1 - z) * max(pair - 2 * r, 0.0) ** z)
    return max(bounds)


def guess_grid(space: MetricSpace, k: int, r: float, z: float, multiplier: float):
    _, U = one_center_cost(space, r, z)
    if U <= 0:
        return [], U
    # OPT = 0 is handled by zero_guess in solve()
    L = cost_lower_bound(space, k, r, z, assume_positive=True)
    if not L > 0:
        # continuous spaces can have optima arbitrarily close to zero
        L = U * 1e-6
    L = min(L, U)
    grid = [L]
    while grid[-1] < U * (1 - 1e-12):
        grid.append(grid[-1] * multiplier)
    return grid, U


def zero_guess(space: MetricSpace, r: float, r_prime: float, z: float, epsilon: float):
    """Extra guess for instances whose optimum may be zero (discrete F only).

    The smallest-positive-distance lower bound assumes OPT > 0.  When every
    client has a facility within r, OPT can be 0 and no grid value above it is
    within a factor of OPT.  This guess is small enough that a run accepting
    it must have cost exactly 0 at radius r'.
    """
    if space.continuous:
        return None
    D = space.client_facility
    if np.any(D.min(axis=1) > r):
        return None
    slack = np.maximum(D - r_prime, 0.0)
    pos = slack[slack > 0]
    if not pos.size:
        return None
    return float(pos.min()) ** z / (2 * (1 + epsilon))


@dataclass
class SolveResult:
    solution: Solution
    cost: float  # at radius (1 + eps/3) r
    radius_used: float
    best: Optional[GuessOutcome]
    report: dict

    def to_json(self) -> dict:
        return {
            "best_cost": self.cost,
            "radius_used": self.radius_used,
            "centers": self.solution.to_json(),
            **self.report,
        }


def _run_guess(space, k, r, z, epsilon, G, guess_index, config_seed, repetitions, cap, diagnose):
    rows = []
    best = None
    try:
        u = compute_upper_bounds(space, G, r)
        marked = greedy_mark(space, u)
    except GuessTooLarge:
        u, marked = None, None
        fixed_reason = GUESS_TOO_LARGE
    else:
        fixed_reason = TOO_MANY_MARKS if len(marked) > k else None
    summary = {"guess_index": guess_index, "G": G, "marked": None if marked is None else len(marked)}
    if fixed_reason is not None:
        for rep in range(repetitions):
            rows.append({"seed": [config_seed, guess_index, rep], "status": "failed", "reason": fixed_reason,
                         "cost": None, "iterations": 0, "nearby": 0, "faraway": 0, "scatter_violations": 0})
        summary.update(successes=0, rows=rows)
        return summary, None

    deterministic = None
    for rep in range(repetitions):
        seed = (config_seed, guess_index, rep)
        if deterministic is not None:
            # initialization alone decided the run: every repetition is identical
            out = GuessOutcome(**{**deterministic.__dict__, "seed": seed, "trace": [], "state": None})
        else:
            out = run_single(space, k, r, epsilon, G, seed, cap, z, u=u, marked=marked)
            if out.iterations == 0:
                deterministic = out
        row = out.record()
        row["scatter_violations"] = (
            scatter_diagnostics(out.trace, epsilon, k, r)["violations"] if diagnose and out.trace else 0)
        rows.append(row)
        if out.ok and (best is None or out.cost < best.cost):
            best = out
    summary.update(successes=sum(r_["status"] == "solution" for r_ in rows), rows=rows)
    return summary, best


def solve(space: MetricSpace, k: int, r: float, epsilon: float, config: SolverConfig | None = None,
          z: float = 1.0, *, diagnose: bool = True) -> SolveResult:
    config = config or SolverConfig(epsilon=epsilon)
    if config.epsilon != epsilon:
        config = SolverConfig(**{**config.__dict__, "epsilon": epsilon})
    r_prime = r * (1 + epsilon / 3)
    cap = config.cap(k)

    if config.guess is not None:
        grid, U = [float(config.guess)], None
    else:
        grid, U = guess_grid(space, k, r, z, config.guess_multiplier)
        if U is not None and U <= 0:
            center, _ = one_center_cost(space, r, z)
            sol = Solution([center])
            report = {"per_guess": [], "guesses": 0, "upper_bound": 0.0}
            return SolveResult(sol, 0.0, r_prime, None, report)
        zg = zero_guess(space, r, r_prime, z, epsilon)
        if zg is not None and zg < grid[0]:
            grid.insert(0, zg)

    jobs = [(space, k, r, z, epsilon, G, gi, config.seed, config.repetitions, cap, diagnose)
            for gi, G in enumerate(grid)]
    workers = max(1, int(config.workers or 1))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_guess_star, jobs))
    else:
        results = [_run_guess(*job) for job in jobs]

    per_guess, best = [], None
    for summary, cand in results:
        per_guess.append(summary)
        if cand is not None and (best is None or (cand.cost, cand.seed) < (best.cost, best.seed)):
            best = cand
    report = {"per_guess": per_guess, "guesses": len(grid), "upper_bound": U}
    if best is None:
        raise NoSolutionFound(report)
    return SolveResult(best.solution, best.cost, r_prime, best, report)


def _run_guess_star(job):
    return _run_guess(*job)


def threads_from_env(default: int | None = None) -> int:
    raw = os.environ.get("HYBRID_THREADS")
    if raw:
        return max(1, int(raw))
    return default or os.cpu_count() or 1


# ---------------------------------------------------------------------------
# scattering diagnostics
# ---------------------------------------------------------------------------

def scatter_diagnostics(trace, epsilon: float, k: int, r: float) -> dict:
    """Check request radii per cluster against the two admissible intervals.

    Nearby-branch radii must lie in [r, 8r/eps]; faraway-branch radii in
    [r, 8r/eps] or [r_min, 1e5 k / eps^2 * r_min], where r_min is the smallest
    faraway radius above 8r/eps.  Only accepted requests are checked.
    Violations are reported, never raised.
    """
    recs = [t.to_json() if isinstance(t, IterationRecord) else t for t in trace]
    hi_near = 8 * r / epsilon
    clusters: dict = {}
    violations = 0
    for rec in recs:
        if not rec["accepted"]:
            continue
        c = clusters.setdefault(rec["index"], {"nearby": [], "faraway": []})
        c[rec["branch"]].append(rec["delta"])
    report = {}
    for i in sorted(clusters):
        near_r, far_r = clusters[i]["nearby"], clusters[i]["faraway"]
        bad = []
        for d in near_r:
            if not (r * (1 - TOL) - TOL <= d <= hi_near * (1 + TOL) + TOL):
                bad.append(("nearby", d))
        above = [d for d in far_r if d > hi_near * (1 + TOL) + TOL]
        r_min = min(above) if above else None
        for d in far_r:
            in_low = r * (1 - TOL) - TOL <= d <= hi_near * (1 + TOL) + TOL
            in_high = r_min is not None and r_min <= d <= 1e5 * k / epsilon ** 2 * r_min * (1 + TOL)
            if not (in_low or in_high):
                bad.append(("faraway", d))
        violations += len(bad)
        report[i] = {
            "nearby_radii": near_r,
            "faraway_radii": far_r,
            "r_min": r_min,
            "length": len(near_r) + len(far_r),
            "violations": bad,
        }
    return {"clusters": report, "violations": violations}

"""Ball intersection: a center within (1 + eta) * delta of every request point.

Discrete facility sets are scanned exhaustively.  For continuous Euclidean
facilities the weighted minimax problem

    min_x  g(x) = max_j ||x - p_j|| / delta_j

is solved through its Lagrangian dual over the simplex,

    g*^2 = max_lam min_x sum_j lam_j ||x - p_j||^2 / delta_j^2,

whose inner minimum is a closed-form weighted mean.  Frank-Wolfe with away
steps on the dual yields a feasible primal point (upper bound) and a dual
value (certified lower bound) at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from . import _kernels
from ._kernels import TOL
from .metric import MetricSpace


class Infeasible(Exception):
    """No center satisfies the requests within the allowed error."""

    def __init__(self, best_ratio: float, message: str = ""):
        super().__init__(message or f"best achievable ratio {best_ratio:.6g}")
        self.best_ratio = best_ratio


class BudgetExceeded(RuntimeError):
    """The continuous solver could neither certify nor refute feasibility in time."""

    def __init__(self, upper: float, lower: float, steps: int):
        super().__init__(f"undecided after {steps} steps: {lower:.6g} <= min ratio <= {upper:.6g}")
        self.upper, self.lower, self.steps = upper, lower, steps


class EmptyRequestError(ValueError):
    pass


@dataclass(frozen=True)
class Request:
    point: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"request radius must be > 0, got {self.radius}")


@dataclass
class RequestSet:
    requests: list[Request] = field(default_factory=list)

    def add(self, point: int, radius: float) -> None:
        self.requests.append(Request(int(point), float(radius)))

    @property
    def points(self) -> np.ndarray:
        return np.array([q.point for q in self.requests], dtype=np.int64)

    @property
    def radii(self) -> np.ndarray:
        return np.array([q.radius for q in self.requests], dtype=np.float64)

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    def copy(self) -> "RequestSet":
        return RequestSet(list(self.requests))

    def to_json(self):
        return [[q.point, q.radius] for q in self.requests]

    @classmethod
    def from_json(cls, rows) -> "RequestSet":
        out = cls()
        for p, d in rows:
            out.add(p, d)
        return out


def _accept(ratio: float, eta: float) -> bool:
    return ratio <= 1.0 + eta + TOL


def request_ratio(space: MetricSpace, Q: RequestSet, center) -> float:
    """max over requests of d(center, p) / delta."""
    d = space.center_table([center])[Q.points, 0]
    return float((d / Q.radii).max())


# ---------------------------------------------------------------------------
# discrete facilities
# ---------------------------------------------------------------------------

def min_ratio_facility(space: MetricSpace, Q: RequestSet) -> tuple[int, float]:
    """Facility minimizing the worst request ratio (ties to the smallest index)."""
    if len(Q) == 0:
        raise EmptyRequestError("empty request set")
    D_fq = space.client_facility[Q.points].T
    return _kernels.min_ratio_scan(D_fq, Q.radii)


def solve_discrete(space: MetricSpace, Q: RequestSet, eta: float) -> int:
    if not eta > 0:
        raise ValueError("eta must be > 0")
    if space.m is None:
        raise TypeError("solve_discrete needs a finite facility set")
    i, ratio = min_ratio_facility(space, Q)
    if not _accept(ratio, eta):
        raise Infeasible(ratio)
    return i


# ---------------------------------------------------------------------------
# continuous Euclidean facilities
# ---------------------------------------------------------------------------

@dataclass
class MinimaxResult:
    x: np.ndarray
    upper: float  # g(x)
    lower: float  # certified lower bound on min g
    steps: int
    status: str  # "feasible" | "infeasible" | "budget" | "optimal"


def _dual_parts(P, inv2, lam):
    w = lam * inv2
    return w @ P, w.sum()


def minimax_point(points, radii, eta: float, *, budget: int | None = None, target: float | None = None) -> MinimaxResult:
    """Approximate argmin of max_j ||x - p_j|| / delta_j.

    With ``target`` set, stops as soon as the upper bound drops to
    ``target * (1 + eta)`` ("feasible") or the lower bound exceeds it
    ("infeasible").  Without a target, runs until the relative gap is below
    ``eta`` ("optimal").
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    q = P.shape[0]
    if q == 0:
        raise EmptyRequestError("empty request set")
    if budget is None:
        budget = 10 * ceil(1.0 / eta) * q
    inv2 = 1.0 / (radii * radii)
    sq = (P * P).sum(axis=1)

    lam = np.full(q, 1.0 / q)
    best_x, best_up, best_lo = None, np.inf, 0.0
    steps = 0
    while True:
        s, t = _dual_parts(P, inv2, lam)
        x = s / t
        # direct squared distances; the expanded form c - |s|^2/t cancels badly
        diff = P - x
        h = (diff * diff).sum(axis=1) * inv2
        phi = float(lam @ h)
        up = sqrt(float(h.max()))
        lo = sqrt(phi)
        if up < best_up:
            best_x, best_up = x.copy(), up
        best_lo = max(best_lo, lo)

        if target is not None:
            if best_up <= target * (1.0 + eta) + TOL:
                return MinimaxResult(best_x, best_up, best_lo, steps, "feasible")
            if best_lo > target * (1.0 + eta) + TOL:
                return MinimaxResult(best_x, best_up, best_lo, steps, "infeasible")
        elif best_up <= best_lo * (1.0 + eta) + TOL:
            return MinimaxResult(best_x, best_up, best_lo, steps, "optimal")
        if steps >= budget:
            return MinimaxResult(best_x, best_up, best_lo, steps, "budget")
        steps += 1

        # toward: vertex with the largest gradient h_j; away: support vertex with the smallest
        j_to = int(np.argmax(h))
        support = np.nonzero(lam > 0)[0]
        j_away = int(support[np.argmin(h[support])])
        gap_to = h[j_to] - lam @ h
        gap_away = lam @ h - h[j_away]
        if gap_to >= gap_away or lam[j_away] >= 1.0:
            d = -lam.copy()
            d[j_to] += 1.0
            gmax = 1.0
        else:
            d = lam.copy()
            d[j_away] -= 1.0
            gmax = lam[j_away] / (1.0 - lam[j_away])
        gamma = _line_search(P, inv2, sq, lam, d, gmax)
        if gamma <= 0.0:
            # no ascent possible along either direction: dual optimum reached
            return MinimaxResult(best_x, best_up, max(best_lo, lo), steps, "optimal" if target is None else (
                "feasible" if best_up <= target * (1.0 + eta) + TOL else "infeasible"))
        lam = lam + gamma * d
        lam[lam < 1e-15] = 0.0
        lam /= lam.sum()


def _line_search(P, inv2, sq, lam, d, gmax):
    """Exact maximizer of the concave dual along lam + gamma * d, gamma in [0, gmax]."""
    s0 = (lam * inv2) @ P
    t0 = (lam * inv2).sum()
    c0 = (lam * inv2) @ sq
    ds = (d * inv2) @ P
    dt = (d * inv2).sum()
    dc = (d * inv2) @ sq
    A, B, C = s0 @ s0, s0 @ ds, ds @ ds

    def phi(g):
        t = t0 + g * dt
        s = s0 + g * ds
        return c0 + g * dc - (s @ s) / t

    # stationarity of c - |s|^2 / t is a quadratic in gamma
    a2 = dt * (dc * dt - C)
    a1 = 2.0 * t0 * (dc * dt - C)
    a0 = dc * t0 * t0 - 2.0 * B * t0 + A * dt
    cands = [0.0, gmax]
    if abs(a2) > 1e-300:
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc >= 0:
            rt = sqrt(disc)
            cands += [(-a1 + rt) / (2.0 * a2), (-a1 - rt) / (2.0 * a2)]
    elif abs(a1) > 1e-300:
        cands.append(-a0 / a1)
    cands = [g for g in cands if 0.0 <= g <= gmax and t0 + g * dt > 0]
    base = phi(0.0)
    best_g, best_v = 0.0, base
    for g in cands:
        v = phi(g)
        if v > best_v:
            best_g, best_v = g, v
    # reject numerically meaningless moves
    if best_v - base <= 1e-15 * max(1.0, abs(base)):
        return 0.0
    return best_g


def solve_euclidean(space: MetricSpace, Q: RequestSet, eta: float, *, budget: int | None = None) -> np.ndarray:
    if not eta > 0:
        raise ValueError("eta must be > 0")
    if len(Q) == 0:
        raise EmptyRequestError("empty request set")
    P = space.client_coords()[Q.points]
    res = minimax_point(P, Q.radii, eta, budget=budget, target=1.0)
    if res.status == "feasible":
        return res.x
    if res.status == "infeasible":
        raise Infeasible(res.lower, f"certified lower bound {res.lower:.6g} exceeds {1 + eta:.6g}")
    raise BudgetExceeded(res.upper, res.lower, res.steps)


def solve(space: MetricSpace, Q: RequestSet, eta: float):
    """Dispatch on the facility model: local facility index or coordinate vector."""
    if space.continuous:
        return solve_euclidean(space, Q, eta)
    return solve_discrete(space, Q, eta)

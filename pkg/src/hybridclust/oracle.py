"""Exact reference optima by exhaustive facility-subset enumeration.

Also hosts the checks that compare a solver state against a known optimum:
bicriteria verification, witness mass and request consistency.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import _kernels
from ._kernels import TOL
from .metric import MetricSpace, Solution, cost

ENUMERATION_BUDGET = 10**7


class EnumerationTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    opt_cost: float
    opt_solution: Solution
    enumerated_count: int
    grid_restricted: bool = False

    def to_json(self) -> dict:
        out = {"opt_cost": self.opt_cost, "centers": self.opt_solution.to_json(),
               "enumerated": self.enumerated_count}
        if self.grid_restricted:
            out["label"] = "grid-restricted"
        return out


def _candidate_table(space: MetricSpace, candidates):
    """Client-to-candidate distances; continuous spaces need an explicit grid."""
    if candidates is not None:
        C = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
        P = space.client_coords()
        return np.sqrt(((P[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)), C
    if space.continuous:
        raise TypeError("continuous facilities: pass a finite candidate grid")
    return space.client_facility, None


def _check_budget(m, k, budget):
    count = _kernels.n_subsets(m, k)
    if count > budget:
        raise EnumerationTooLarge(f"C({m},{min(k, m)}) = {count} subsets exceeds budget {budget}")


def brute_force(space: MetricSpace, k: int, r: float, z: float = 1.0, *, candidates=None,
                budget: int = ENUMERATION_BUDGET) -> OracleResult:
    """Exact optimum over all facility subsets of size min(k, |F|).

    Ties go to the lexicographically first subset.  With ``candidates`` the
    search runs over that finite grid instead of F and is labeled
    grid-restricted.
    """
    D, C = _candidate_table(space, candidates)
    m = D.shape[1]
    kk = min(k, m)
    _check_budget(m, kk, budget)
    _, idx, count = _kernels.best_subset(D, kk, r, z)
    if C is not None:
        sol = Solution([C[i].copy() for i in idx])
        opt = float(_cost_on_table(D[:, idx], r, z))
    else:
        sol = Solution(idx)
        opt = cost(space, None, sol, r, z)
    return OracleResult(opt, sol, count, grid_restricted=C is not None)


def _cost_on_table(T, r, z):
    s = np.maximum(T.min(axis=1) - r, 0.0)
    return (s if z == 1.0 else s ** z).sum()


def kcenter_radius(space: MetricSpace, k: int, *, candidates=None, budget: int = ENUMERATION_BUDGET) -> float:
    D, _ = _candidate_table(space, candidates)
    m = D.shape[1]
    kk = min(k, m)
    _check_budget(m, kk, budget)
    radius, _, _ = _kernels.best_subset_minmax(D, kk)
    return radius


def verify_bicriteria(space: MetricSpace, X: Solution, k: int, r: float, epsilon: float,
                      opt_cost: float, z: float = 1.0) -> tuple[bool, dict]:
    got = cost(space, None, X, (1 + epsilon) * r, z)
    bound = (1 + epsilon) * opt_cost * (1 + TOL)
    ok = len(X) <= k and got <= bound
    return ok, {"size": len(X), "k": k, "cost": got, "bound": bound, "opt_cost": opt_cost}


# ---------------------------------------------------------------------------
# state checks against a known optimum
# ---------------------------------------------------------------------------

def witness_mass(space: MetricSpace, X, O, r: float, epsilon: float) -> tuple[float, float]:
    """(C_W, C_P): inflated-radius cost carried by the witnesses versus all clients.

    A witness is a client whose (1 + eps/3) r-distance to X exceeds
    (1 + eps/3) times its r-distance to O.
    """
    r_prime = r * (1 + epsilon / 3)
    near_x = space.nearest(X.centers if isinstance(X, Solution) else X)
    near_o = space.nearest(O.centers if isinstance(O, Solution) else O)
    dx = np.maximum(near_x - r_prime, 0.0)
    do = np.maximum(near_o - r, 0.0)
    witness = dx > (1 + epsilon / 3) * do
    return float(dx[witness].sum()), float(dx.sum())


def consistent_labeling(space: MetricSpace, Q, O) -> tuple | None:
    """A permutation pi with d(p, o_pi(i)) <= delta for every (p, delta) in Q_i, or None.

    ``Q`` is the list of k request sets; ``O`` lists k optimal centers (a
    shorter optimum is padded by repeating its last center).
    """
    centers = list(O.centers if isinstance(O, Solution) else O)
    k = len(Q)
    while len(centers) < k:
        centers.append(centers[-1])
    table = space.center_table(centers)
    ok = np.ones((k, len(centers)), dtype=bool)
    for i, Qi in enumerate(Q):
        for req in Qi:
            ok[i] &= table[req.point] <= req.radius * (1 + TOL) + TOL
    for perm in permutations(range(len(centers)), k):
        if all(ok[i, perm[i]] for i in range(k)):
            return perm
    return None

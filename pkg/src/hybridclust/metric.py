"""Metric spaces, r-distances, hybrid costs and ball queries.

Points of ``P ∪ F`` are addressed by a *global* index: clients occupy
``0..n-1`` and facilities ``n..n+m-1``.  Euclidean spaces also accept raw
coordinate vectors as point descriptors.  A solution stores facilities by
their *local* index ``0..m-1`` (or by coordinates when facilities are the
whole of R^dim).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from ._kernels import TOL


class MetricError(ValueError):
    """Malformed metric data (asymmetric matrix, broken triangle inequality, ...)."""


class InvalidPointError(IndexError):
    pass


class EmptySolutionError(ValueError):
    pass


class MetricSpace:
    """Clients ``P``, facilities ``F`` and a distance oracle.

    Build with :meth:`euclidean` or :meth:`from_matrix`.  Instances are treated
    as immutable; cached distance blocks are computed once on first use.
    """

    def __init__(self, kind, *, clients=None, facilities=None, dist=None, dim=None, n_clients=None):
        self.kind = kind
        self._clients = clients
        self._facilities = facilities
        self._dist = dist
        self.dim = dim
        if kind == "matrix":
            self.n = int(n_clients)
            self.m = dist.shape[0] - self.n
        else:
            self.n = clients.shape[0]
            self.m = None if facilities is None else facilities.shape[0]
        if self.n < 1:
            raise MetricError("a metric space needs at least one client")
        self._cc = None
        self._cf = None

    # -- construction ------------------------------------------------------

    @classmethod
    def euclidean(cls, clients, facilities=None) -> "MetricSpace":
        """Euclidean space; ``facilities=None`` means every point of R^dim is a facility."""
        P = np.atleast_2d(np.asarray(clients, dtype=np.float64))
        if P.size == 0:
            raise MetricError("a metric space needs at least one client")
        dim = P.shape[1]
        F = None
        if facilities is not None:
            F = np.atleast_2d(np.asarray(facilities, dtype=np.float64))
            if F.size == 0:
                raise MetricError("discrete facility set is empty")
            if F.shape[1] != dim:
                raise MetricError(f"facility dimension {F.shape[1]} != client dimension {dim}")
        if not np.all(np.isfinite(P)) or (F is not None and not np.all(np.isfinite(F))):
            raise MetricError("coordinates must be finite")
        return cls("euclidean", clients=P, facilities=F, dim=dim)

    @classmethod
    def from_matrix(cls, dist, clients: Sequence[int], facilities: Sequence[int], *, validate: bool = True) -> "MetricSpace":
        """Finite metric given by a full distance matrix.

        ``clients`` and ``facilities`` index rows of ``dist``; the same row may
        appear in both lists (a client co-located with a facility).
        """
        D = np.asarray(dist, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise MetricError("distance matrix must be square")
        if validate:
            check_metric(D)
        clients, facilities = list(clients), list(facilities)
        rows = clients + facilities
        if not clients:
            raise MetricError("a metric space needs at least one client")
        if not facilities:
            raise MetricError("discrete facility set is empty")
        for i in rows:
            if not 0 <= int(i) < D.shape[0]:
                raise InvalidPointError(f"index {i} outside distance matrix of size {D.shape[0]}")
        rows = np.asarray(rows, dtype=np.int64)
        return cls("matrix", dist=np.ascontiguousarray(D[np.ix_(rows, rows)]), n_clients=len(clients))

    # -- basic properties ----------------------------------------------------

    @property
    def continuous(self) -> bool:
        return self.kind == "euclidean" and self._facilities is None

    @property
    def size(self) -> int:
        return self.n + (self.m or 0)

    def client_coords(self) -> np.ndarray:
        if self.kind != "euclidean":
            raise TypeError("matrix spaces have no coordinates")
        return self._clients

    def facility_coords(self) -> np.ndarray:
        if self.kind != "euclidean" or self._facilities is None:
            raise TypeError("no finite facility coordinates")
        return self._facilities

    def coords(self, desc) -> np.ndarray:
        if isinstance(desc, np.ndarray):
            return desc
        g = self._check_index(desc)
        return self._clients[g] if g < self.n else self._facilities[g - self.n]

    def facility_point(self, center):
        """Global descriptor of a solution center (local facility index or coordinates)."""
        if isinstance(center, (np.ndarray, list, tuple)):
            return np.asarray(center, dtype=np.float64)
        j = int(center)
        if self.m is None or not 0 <= j < self.m:
            raise InvalidPointError(f"facility index {j} out of range")
        return self.n + j

    def _check_index(self, g) -> int:
        g = int(g)
        if not 0 <= g < self.size:
            raise InvalidPointError(f"point index {g} out of range for space of size {self.size}")
        return g

    # -- distance blocks -----------------------------------------------------

    @property
    def client_client(self) -> np.ndarray:
        if self._cc is None:
            if self.kind == "matrix":
                self._cc = self._dist[: self.n, : self.n]
            else:
                self._cc = _pairwise(self._clients, self._clients)
        return self._cc

    @property
    def client_facility(self) -> np.ndarray:
        """(n, m) distances between clients and discrete facilities."""
        if self.m is None:
            raise TypeError("continuous facility set has no distance table")
        if self._cf is None:
            if self.kind == "matrix":
                self._cf = np.ascontiguousarray(self._dist[: self.n, self.n:])
            else:
                self._cf = _pairwise(self._clients, self._facilities)
        return self._cf

    def all_points_block(self, rows: Iterable) -> np.ndarray:
        """Distances from each descriptor in ``rows`` to every point of P ∪ F (discrete F)."""
        if self.kind == "matrix":
            return self._dist[np.asarray([self._check_index(g) for g in rows], dtype=np.int64)]
        pts = self._clients if self._facilities is None else np.vstack([self._clients, self._facilities])
        return _pairwise(np.array([self.coords(g) for g in rows]), pts)

    def dists_from(self, desc) -> np.ndarray:
        """Distances from one point descriptor to every client."""
        if isinstance(desc, np.ndarray):
            if self.kind != "euclidean":
                raise InvalidPointError("coordinate descriptors need a euclidean space")
            return np.sqrt(((self._clients - desc[None, :]) ** 2).sum(axis=1))
        g = self._check_index(desc)
        if self.kind == "matrix":
            return self._dist[g, : self.n]
        if g < self.n:
            return self.client_client[g]
        return self.client_facility[:, g - self.n]

    def center_table(self, centers) -> np.ndarray:
        """(n, |centers|) distance table for solution centers."""
        if len(centers) == 0:
            raise EmptySolutionError("solution has no centers")
        if self.m is not None and all(_is_index(c) for c in centers):
            return self.client_facility[:, [int(c) for c in centers]]
        return np.column_stack([self.dists_from(self.facility_point(c)) for c in centers])

    def nearest(self, centers) -> np.ndarray:
        """d(p, X) for every client p."""
        return self.center_table(centers).min(axis=1)


def _is_index(c) -> bool:
    return isinstance(c, (int, np.integer))


def _pairwise(A, B) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def check_metric(D: np.ndarray, *, triangle: bool = True, tol: float = TOL) -> None:
    if not np.all(np.isfinite(D)):
        raise MetricError("distance matrix has non-finite entries")
    if np.any(D < 0):
        raise MetricError("distance matrix has negative entries")
    if np.max(np.abs(D - D.T), initial=0.0) > tol:
        raise MetricError("distance matrix is not symmetric")
    if np.max(np.abs(np.diag(D)), initial=0.0) > tol:
        raise MetricError("distance matrix has a nonzero diagonal")
    if triangle:
        excess = _kernels.triangle_excess(D)
        if excess > tol:
            raise MetricError(f"triangle inequality violated by {excess:.3g}")


# ---------------------------------------------------------------------------
# instance / solution containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    space: MetricSpace
    k: int
    r: float
    z: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.r >= 0:
            raise ValueError("r must be >= 0")
        if not self.z >= 1:
            raise ValueError("z must be >= 1")


@dataclass
class Solution:
    centers: list

    def __post_init__(self):
        if len(self.centers) == 0:
            raise EmptySolutionError("solution has no centers")

    def __len__(self):
        return len(self.centers)

    def to_json(self):
        return [c.tolist() if isinstance(c, np.ndarray) else int(c) for c in self.centers]


@dataclass
class WeightedClientSet:
    """Clients with positive integer multiplicities."""

    members: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for p, w in self.members:
            if p in seen:
                raise ValueError(f"client {p} listed twice")
            if w < 1:
                raise ValueError("weights must be >= 1")
            seen.add(p)

    @property
    def indices(self) -> np.ndarray:
        return np.array([p for p, _ in self.members], dtype=np.int64)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.members], dtype=np.float64)

    @property
    def total_weight(self) -> int:
        return int(sum(w for _, w in self.members))

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# distance / cost operations
# ---------------------------------------------------------------------------

def distance(space: MetricSpace, a, b) -> float:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        if space.kind != "euclidean":
            raise InvalidPointError("coordinate descriptors need a euclidean space")
        return float(np.linalg.norm(space.coords(a) - space.coords(b)))
    ga, gb = space._check_index(a), space._check_index(b)
    if space.kind == "matrix":
        return float(space._dist[ga, gb])
    return float(np.linalg.norm(space.coords(ga) - space.coords(gb)))


def alpha_distance(d_val, alpha):
    """max(d - alpha, 0); works elementwise on arrays."""
    if isinstance(d_val, np.ndarray):
        return np.maximum(d_val - alpha, 0.0)
    return max(d_val - alpha, 0.0)


def point_set_alpha_distance(space: MetricSpace, p: int, X: Solution, alpha: float) -> float:
    if len(X.centers) == 0:
        raise EmptySolutionError("solution has no centers")
    d = min(distance(space, p, space.facility_point(c)) for c in X.centers)
    return alpha_distance(d, alpha)


def cost(space: MetricSpace, clients, X, alpha: float, z: float = 1.0) -> float:
    """Sum of weight * d_alpha(p, X)^z.

    ``clients`` is ``None`` (all of P), an index array, or a
    :class:`WeightedClientSet`.  ``X`` may be a :class:`Solution` or a bare list
    of centers.
    """
    centers = X.centers if isinstance(X, Solution) else X
    near = space.nearest(centers)
    return cost_from_nearest(near, clients, alpha, z)


def cost_from_nearest(near: np.ndarray, clients, alpha: float, z: float = 1.0) -> float:
    if clients is None:
        slack, w = np.maximum(near - alpha, 0.0), None
    elif isinstance(clients, WeightedClientSet):
        slack, w = np.maximum(near[clients.indices] - alpha, 0.0), clients.weights
    else:
        slack, w = np.maximum(near[np.asarray(clients, dtype=np.int64)] - alpha, 0.0), None
    if z != 1.0:
        slack = slack ** z
    return float(slack.sum() if w is None else (w * slack).sum())


def ball(space: MetricSpace, p, alpha: float) -> np.ndarray:
    """Indices of clients q with d(p, q) <= alpha (closed ball)."""
    if alpha < 0:
        raise ValueError("ball radius must be >= 0")
    return np.nonzero(space.dists_from(p) <= alpha)[0]


def diameter(space: MetricSpace) -> float:
    d = float(space.client_client.max())
    if space.m is not None:
        d = max(d, float(space.client_facility.max()))
    return d


# ---------------------------------------------------------------------------
# instance files
# ---------------------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    s = inst.space
    out: dict = {"kind": s.kind}
    if s.kind == "euclidean":
        out["dim"] = s.dim
        out["clients"] = s.client_coords().tolist()
        out["facilities"] = None if s.continuous else s.facility_coords().tolist()
    else:
        out["clients"] = list(range(s.n))
        out["facilities"] = list(range(s.n, s.n + s.m))
        out["dist"] = s._dist.tolist()
    out.update(k=inst.k, r=inst.r, z=inst.z)
    return out


def instance_from_dict(doc: dict, *, validate: bool = True) -> Instance:
    kind = doc.get("kind")
    if kind == "euclidean":
        clients = np.asarray(doc["clients"], dtype=np.float64)
        if "dim" in doc and clients.ndim == 2 and clients.shape[1] != int(doc["dim"]):
            raise MetricError("client coordinates disagree with 'dim'")
        space = MetricSpace.euclidean(clients, doc.get("facilities"))
    elif kind == "matrix":
        space = MetricSpace.from_matrix(doc["dist"], doc["clients"], doc["facilities"], validate=validate)
    else:
        raise MetricError(f"unknown instance kind {kind!r}")
    return Instance(space, int(doc["k"]), float(doc["r"]), float(doc.get("z", 1.0)))


def load_instance(path, *, validate: bool = True) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh), validate=validate)


def save_instance(inst: Instance, path) -> None:
    from .io import atomic_write_text

    atomic_write_text(Path(path), json.dumps(instance_to_dict(inst), sort_keys=True) + "\n")

"""Seeded random instance generators."""

from __future__ import annotations

import numpy as np

from .metric import Instance, MetricSpace

KINDS = ("euclidean-uniform", "euclidean-planted", "matrix-random-metric")


def generate(kind: str, n: int, m: int, dim: int = 2, k: int = 2, r: float = 0.0, seed: int = 0,
             z: float = 1.0) -> Instance:
    if n < 1 or m < 1 or dim < 1 or k < 1:
        raise ValueError("n, m, dim and k must all be >= 1")
    if r < 0:
        raise ValueError("r must be >= 0")
    rng = np.random.default_rng(seed)
    if kind == "euclidean-uniform":
        space = MetricSpace.euclidean(rng.uniform(0, 10, (n, dim)), rng.uniform(0, 10, (m, dim)))
    elif kind == "euclidean-planted":
        space = MetricSpace.euclidean(*_planted(rng, n, m, dim, k))
    elif kind == "matrix-random-metric":
        D = random_graph_metric(rng, n + m)
        space = MetricSpace.from_matrix(D, range(n), range(n, n + m))
    else:
        raise ValueError(f"unknown generator kind {kind!r}; choose from {', '.join(KINDS)}")
    return Instance(space, k, float(r), float(z))


def _planted(rng, n, m, dim, k):
    centers = rng.uniform(0, 10, (k, dim))
    labels = rng.integers(k, size=n)
    P = centers[labels] + rng.normal(0, 0.6, (n, dim))
    near = min(m, k)
    F = np.vstack([
        centers[:near] + rng.normal(0, 0.3, (near, dim)),
        rng.uniform(0, 10, (m - near, dim)),
    ])
    return P, F


def random_graph_metric(rng, N: int, extra_edges: float = 1.5) -> np.ndarray:
    """Shortest-path closure of a random connected weighted graph on N nodes."""
    W = np.full((N, N), np.inf)
    np.fill_diagonal(W, 0.0)
    order = rng.permutation(N)
    for a in range(1, N):
        b = order[rng.integers(a)]
        w = rng.uniform(1, 10)
        W[order[a], b] = W[b, order[a]] = min(W[order[a], b], w)
    for _ in range(int(extra_edges * N)):
        a, b = rng.integers(N, size=2)
        if a != b:
            w = rng.uniform(1, 10)
            W[a, b] = W[b, a] = min(W[a, b], w)
    for c in range(N):
        W = np.minimum(W, W[:, c, None] + W[None, c, :])
    return W

"""Replica placement: K-means partition, then p-center inside each cluster.

Sites are 2-D points with nonnegative demand weights.  Response time is the
distance to the nearest replica times a linear factor (ms per unit).  The
headline cost is the demand-weighted mean response time; the worst-case
response time is reported alongside.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass
class SiteSet:
    coords: np.ndarray | None  # (n, 2)
    weights: np.ndarray  # (n,)
    distances: np.ndarray | None = None  # (n, n) explicit response-time matrix

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.ndim != 2 or len(self.coords) != len(self.weights):
                raise ValueError("coords must be (n, d) with one row per weight")
        if np.any(self.weights < 0) or not np.any(self.weights > 0):
            raise ValueError("weights must be nonnegative with at least one positive")
        if self.distances is not None:
            d = np.asarray(self.distances, dtype=float)
            n = len(self.weights)
            if d.shape != (n, n):
                raise ValueError("distance matrix must be n x n")
            if np.any(d < 0) or not np.allclose(d, d.T) or np.any(np.diag(d) != 0):
                raise ValueError("distance matrix must be nonnegative, symmetric, zero on the diagonal")
            self.distances = d
        elif self.coords is None:
            raise ValueError("need coordinates or a distance matrix")

    def __len__(self) -> int:
        return len(self.weights)

    def distance_matrix(self) -> np.ndarray:
        if self.distances is not None:
            return self.distances
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff**2).sum(-1))

    def embedding(self) -> np.ndarray:
        """Coordinates for clustering; classical MDS when only distances are known."""
        if self.coords is not None:
            return self.coords
        d2 = self.distances**2
        n = len(d2)
        j = np.eye(n) - 1.0 / n
        b = -0.5 * j @ d2 @ j
        vals, vecs = np.linalg.eigh(b)
        order = np.argsort(vals)[::-1][:2]
        return vecs[:, order] * np.sqrt(np.maximum(vals[order], 0.0))


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective_history: list[float]
    iterations: int


@dataclass
class ReplicaPlacement:
    labels: np.ndarray  # cluster of each site
    centers: np.ndarray  # replica site indices
    nearest: np.ndarray  # nearest replica (site index) for each site
    response: np.ndarray  # response time of each site
    cost: float  # weighted mean response time
    worst_case: float


def _sq_dists(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)


def kmeans(points, k: int, rng: np.random.Generator, max_iter: int = 100) -> KMeansResult:
    """Lloyd iterations from a farthest-point initialization.

    The first centroid is a random site; each next one is the site farthest
    from those already chosen.  A cluster that empties is reseeded with the
    site farthest from its current centroid.
    """
    x = np.asarray(points, dtype=float)
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    chosen = [int(rng.integers(n))]
    d = _sq_dists(x, x[chosen]).min(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, _sq_dists(x, x[[nxt]])[:, 0])
    centroids = x[chosen].copy()

    history = []
    labels = np.full(n, -1)
    it = 0
    for it in range(1, max_iter + 1):
        sq = _sq_dists(x, centroids)
        new_labels = np.argmin(sq, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                own = sq[np.arange(n), new_labels]
                own[np.bincount(new_labels, minlength=k)[new_labels] <= 1] = -1.0  # never empty another cluster
                far = int(np.argmax(own))
                new_labels[far] = c
                centroids[c] = x[far]
                sq = _sq_dists(x, centroids)
        history.append(float(sq[np.arange(n), new_labels].sum()))
        for c in range(k):
            centroids[c] = x[new_labels == c].mean(axis=0)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    history.append(float(_sq_dists(x, centroids)[np.arange(n), labels].sum()))
    return KMeansResult(labels, centroids, history, it)


def covering_radius(dist, centers) -> float:
    return float(np.asarray(dist)[:, list(centers)].min(axis=1).max())


def p_center_exact(dist, p: int) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    n = len(dist)
    best, best_set = np.inf, None
    for subset in itertools.combinations(range(n), p):  # lexicographic: ties keep lowest indices
        r = dist[:, subset].min(axis=1).max()
        if r < best:
            best, best_set = r, subset
    return np.array(best_set)


def p_center_greedy(dist, p: int) -> np.ndarray:
    """Farthest-point heuristic (within 2x of optimal on metric distances).

    Starts from the best single center; ties go to the lowest index.
    """
    dist = np.asarray(dist, dtype=float)
    centers = [int(np.argmin(dist.max(axis=0)))]
    near = dist[:, centers[0]].copy()
    while len(centers) < p:
        nxt = int(np.argmax(near))
        centers.append(nxt)
        near = np.minimum(near, dist[:, nxt])
    return np.array(sorted(centers))


def p_center(dist, p: int, exact_limit: int = 12) -> np.ndarray:
    """Local indices of p centers minimizing the largest distance to a center."""
    dist = np.asarray(dist, dtype=float)
    n = len(dist)
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in 1..{n}, got {p}")
    if n <= exact_limit:
        return p_center_exact(dist, p)
    return p_center_greedy(dist, p)


def placement_cost(dist, weights, centers) -> tuple[np.ndarray, np.ndarray, float, float]:
    """(nearest center, response time, weighted mean, worst case) for a center set."""
    dist = np.asarray(dist, dtype=float)
    weights = np.asarray(weights, dtype=float)
    centers = np.asarray(centers, dtype=int)
    sub = dist[:, centers]
    idx = np.argmin(sub, axis=1)
    resp = sub[np.arange(len(dist)), idx]
    return centers[idx], resp, float(weights @ resp / weights.sum()), float(resp.max())


def hybrid_place(
    sites: SiteSet,
    k: int,
    p_per_cluster: int,
    rng: np.random.Generator,
    ms_per_unit: float = 1.0,
    max_iter: int = 100,
) -> ReplicaPlacement:
    n = len(sites)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    dist = sites.distance_matrix() * ms_per_unit
    labels = kmeans(sites.embedding(), k, rng, max_iter).labels
    centers = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        p = min(p_per_cluster, len(members))
        if p < 1:
            raise ValueError("p_per_cluster must be >= 1")
        local = p_center(dist[np.ix_(members, members)], p)
        centers.extend(members[local].tolist())
    centers = np.array(sorted(centers))
    nearest, resp, cost, worst = placement_cost(dist, sites.weights, centers)
    return ReplicaPlacement(labels, centers, nearest, resp, cost, worst)


def random_placement_cost(sites: SiteSet, n_replicas: int, rng: np.random.Generator, draws: int = 100,
                          ms_per_unit: float = 1.0) -> float:
    """Mean weighted response time of ``draws`` uniformly random replica sets."""
    dist = sites.distance_matrix() * ms_per_unit
    costs = [
        placement_cost(dist, sites.weights, rng.choice(len(sites), n_replicas, replace=False))[2]
        for _ in range(draws)
    ]
    return float(np.mean(costs))

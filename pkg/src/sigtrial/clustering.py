"""k-means partitioning of risk scores with canonical cluster labels.

Restarted k-means++ / Lloyd with deterministic seeding, plus a labeling rule
that makes cluster indices comparable across cross-validation folds: for two
clusters the higher-scoring one is canonical 2 ("sensitive"); for four
clusters the quadrant map (low,low) -> 1, (low,high) -> 2, (high,low) -> 3,
(high,high) -> 4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, TooFewPoints
from .statnum import RngStream

__all__ = ["CanonicalLabels", "KmeansResult", "canonicalize", "kmeans"]

N_RESTARTS = 20
MAX_LLOYD_ITER = 100


@dataclass
class KmeansResult:
    assignment: np.ndarray  # raw cluster index per point, in {0..k-1}
    centroids: np.ndarray  # (k, d)
    within_ss: float
    n_iterations: int


@dataclass(frozen=True)
class CanonicalLabels:
    """Bijective map from raw cluster index to canonical index in {1..k}."""

    mapping: tuple

    def apply(self, assignment: np.ndarray) -> np.ndarray:
        lut = np.asarray(self.mapping, dtype=np.int64)
        return lut[assignment]


def _plusplus_seed(points: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    idx = int(gen.integers(n))
    centroids[0] = points[idx]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(gen.integers(n))
        else:
            r = gen.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centroids[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[c]) ** 2, axis=1))
    return centroids


def _lloyd(points: np.ndarray, centroids: np.ndarray) -> KmeansResult:
    k = centroids.shape[0]
    prev_ss = np.inf
    assignment = None
    it = 0
    for it in range(1, MAX_LLOYD_ITER + 1):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assignment = np.argmin(d2, axis=1)
        # repair empties by splitting the largest cluster at its farthest point
        for c in range(k):
            if not np.any(assignment == c):
                counts = np.bincount(assignment, minlength=k)
                big = int(np.argmax(counts))
                members = np.flatnonzero(assignment == big)
                far = members[
                    int(np.argmax(np.sum((points[members] - centroids[big]) ** 2, axis=1)))
                ]
                assignment[far] = c
                centroids[c] = points[far]
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            new_centroids[c] = points[assignment == c].mean(axis=0)
        d2 = np.sum((points - new_centroids[assignment]) ** 2, axis=1)
        ss = float(d2.sum())
        if ss > prev_ss + 1e-9:
            raise AssertionError("within-cluster SS increased during Lloyd iteration")
        centroids = new_centroids
        if prev_ss - ss <= 1e-12 * max(1.0, abs(prev_ss)) or prev_ss == ss:
            prev_ss = ss
            break
        prev_ss = ss
    return KmeansResult(assignment, centroids, prev_ss if np.isfinite(prev_ss) else 0.0, it)


def kmeans(points: np.ndarray, k: int, rng: RngStream) -> KmeansResult:
    """Best of 20 k-means++ restarts (ties broken by lowest restart index)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] not in (1, 2):
        raise InvalidInput("points must be 1- or 2-dimensional")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("points must be finite")
    if k not in (2, 4):
        raise InvalidInput(f"k must be 2 or 4, got {k}")
    n = pts.shape[0]
    if n < k:
        raise TooFewPoints(f"need at least {k} points, got {n}")

    best = None
    for r in range(N_RESTARTS):
        gen = rng.child("kmeans", r).generator
        seeds = _plusplus_seed(pts, k, gen)
        result = _lloyd(pts, seeds.copy())
        if best is None or result.within_ss < best.within_ss - 1e-15:
            best = result
    return best


def canonicalize(centroids: np.ndarray) -> CanonicalLabels:
    """Canonical labels for k = 2 or k = 4 centroid sets.

    k = 2: the centroid with the larger coordinate sum is canonical 2.
    k = 4 (2-D): per dimension the two larger-coordinate centroids are
    "high"; quadrants map to 1..4.  A non-bijective quadrant map falls back
    to ordering by (coordinate sum, first coordinate).
    """
    c = np.asarray(centroids, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    k, d = c.shape
    if k == 2:
        sums = c.sum(axis=1)
        if sums[0] <= sums[1]:
            return CanonicalLabels((1, 2))
        return CanonicalLabels((2, 1))
    if k == 4:
        if d != 2:
            raise InvalidInput("k=4 canonicalization requires 2-D centroids")
        high = np.zeros((4, 2), dtype=bool)
        for dim in range(2):
            order = np.argsort(c[:, dim], kind="stable")
            high[order[2:], dim] = True
        quadrant = 1 + 2 * high[:, 0].astype(int) + high[:, 1].astype(int)
        if len(set(quadrant.tolist())) == 4:
            return CanonicalLabels(tuple(int(q) for q in quadrant))
        order = sorted(range(4), key=lambda i: (c[i].sum(), c[i, 0]))
        mapping = [0] * 4
        for rank, i in enumerate(order):
            mapping[i] = rank + 1
        return CanonicalLabels(tuple(mapping))
    raise InvalidInput(f"k must be 2 or 4, got {k}")

"""Seeded k-means over scenario feature vectors (zone margin deltas, in percent)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    rows: tuple[str, ...]  # case labels
    cols: tuple[str, ...]  # zone labels
    values: np.ndarray
    col_ids: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(len(self.rows), len(self.cols))
        if not np.all(np.isfinite(values)):
            raise ClusteringError("feature matrix has undefined entries")
        object.__setattr__(self, "values", values)
        if not self.col_ids:
            object.__setattr__(self, "col_ids", tuple(range(1, len(self.cols) + 1)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def subset(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(tuple(self.rows[i] for i in idx), self.cols,
                             self.values[idx, :], self.col_ids)

    def where(self, predicate) -> "FeatureMatrix":
        return self.subset([i for i, r in enumerate(self.rows) if predicate(r)])


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignment: tuple[int, ...]
    inertia: float
    iterations: int
    seed: int
    inertia_trace: tuple[float, ...] = ()
    rows: tuple[str, ...] = field(default_factory=tuple)
    cols: tuple[str, ...] = field(default_factory=tuple)

    def members(self, cluster: int) -> list[int]:
        return [i for i, c in enumerate(self.assignment) if c == cluster]


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:  # every point already sits on a centre; any unused index will do
            free = [i for i in range(n) if i not in chosen]
            nxt = int(free[rng.integers(len(free))])
        chosen.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return chosen


def _inertia(x, centroids, labels) -> float:
    diff = x - centroids[labels]
    return float(np.einsum("nd,nd->", diff, diff))


def kmeans(features: FeatureMatrix, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-10,
           init_indices: Optional[Sequence[int]] = None) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start.

    ``init_indices`` overrides the seeding with explicit starting rows.
    """
    x = features.values
    n = len(x)
    if n == 0:
        raise ClusteringError("feature matrix has no rows")
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} must lie in [1, {n}]")
    if max_iter < 1 or tol < 0:
        raise ClusteringError("max_iter must be >= 1 and tol >= 0")

    rng = np.random.default_rng(seed)
    start = list(init_indices) if init_indices is not None else plus_plus_init(x, k, rng)
    if len(start) != k:
        raise ClusteringError("init_indices must name exactly k rows")
    centroids = x[start].copy()
    trace: list[float] = []
    labels = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dist(x, centroids)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                own = d2[np.arange(n), new_labels]
                far = int(np.argmax(own))
                if own[far] > 0:
                    new_labels[far] = c
                    centroids[c] = x[far]
        inertia = _inertia(x, centroids, new_labels)
        if trace and inertia > trace[-1] * (1 + 1e-12) + 1e-12:
            raise RuntimeError(f"inertia increased from {trace[-1]} to {inertia}")
        trace.append(inertia)
        new_centroids = centroids.copy()
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                new_centroids[c] = x[mask].mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        unchanged = labels is not None and np.array_equal(labels, new_labels)
        labels, centroids = new_labels, new_centroids
        if unchanged or shift < tol or shift == 0:
            break

    final = _inertia(x, centroids, labels)
    if final > trace[-1] * (1 + 1e-12) + 1e-12:
        raise RuntimeError("inertia increased in the final centroid update")
    trace.append(final)
    return ClusterModel(k=k, centroids=centroids, assignment=tuple(int(c) for c in labels),
                        inertia=final, iterations=iterations, seed=seed, inertia_trace=tuple(trace),
                        rows=features.rows, cols=features.cols)


def order_clusters(model: ClusterModel) -> list[int]:
    """Clusters by descending mean centroid value; ties go to the lower index."""
    means = [float(np.mean(model.centroids[c])) if model.centroids.shape[1] else 0.0
             for c in range(model.k)]
    return sorted(range(model.k), key=lambda c: (-means[c], c))


def display_order(model: ClusterModel) -> list[list[int]]:
    """Row indices grouped by displayed cluster (empty clusters are skipped).

    Within a group rows keep their feature-matrix order, which the scan
    already sorts by branch id then scheme.
    """
    groups = [model.members(c) for c in order_clusters(model)]
    return [g for g in groups if g]


def elbow(features: FeatureMatrix, seed: int = 0, k_max: int = 10, **kw) -> list[tuple[int, float]]:
    """Final inertia for k = 1..min(k_max, rows)."""
    top = min(k_max, len(features.rows))
    return [(k, kmeans(features, k, seed, **kw).inertia) for k in range(1, top + 1)]


def model_to_document(model: ClusterModel) -> dict:
    return {
        "k": model.k,
        "seed": model.seed,
        "iterations": model.iterations,
        "inertia": model.inertia,
        "inertia_trace": list(model.inertia_trace),
        "zones": list(model.cols),
        "centroids": [[float(v) for v in row] for row in model.centroids],
        "assignment": {label: c for label, c in zip(model.rows, model.assignment)},
    }

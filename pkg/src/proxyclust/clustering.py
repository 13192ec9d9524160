"""Lloyd's k-means with restarts, plus NMI and Rand index between
labelings, plus the cross-clustering analysis matrix.

k-means starts from uniformly chosen distinct data points (restarts
compensate for the plain initialization), stops at an assignment
fixpoint or max_iters, and reseeds any emptied cluster to the point
farthest from its assigned centroid. NMI is normalized by the arithmetic
mean of the entropies; swap `_nmi_normalizer` for the sqrt variant if a
different convention is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericalError


@dataclass(frozen=True)
class Labeling:
    assignments: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        if a.ndim != 1:
            raise DimensionError("assignments must be a flat integer list")
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise ConfigError(f"labels must lie in [0, {self.k})")
        a.setflags(write=False)

    def __len__(self) -> int:
        return self.assignments.shape[0]

    @staticmethod
    def from_assignments(assignments) -> "Labeling":
        """Compact arbitrary integer labels into [0, k)."""
        a = np.asarray(assignments, dtype=np.int64)
        _, compact = np.unique(a, return_inverse=True)
        return Labeling(compact, int(compact.max()) + 1 if compact.size else 0)


@dataclass(frozen=True)
class KMeansResult:
    assignments: Labeling
    centroids: np.ndarray
    inertia: float
    restart_index: int = 0
    inertia_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class RestartsResult:
    best: KMeansResult
    runs: tuple[KMeansResult, ...]


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points: np.ndarray, k: int, max_iters: int = 300, seed: int = 0,
           restart_index: int = 0) -> KMeansResult:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError(f"points must be an n x d matrix, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must satisfy 1 <= k <= n={n}")
    if not np.all(np.isfinite(points)):
        raise NumericalError("k-means input contains non-finite values")
    rng = np.random.default_rng(seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = _sq_dists(points, centroids)
        new_labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(point_d2))
                new_labels[far] = j
                centroids[j] = points[far]
                point_d2[far] = 0.0
        history.append(float(point_d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = points[labels == j].mean(axis=0)
    d2 = _sq_dists(points, centroids)
    inertia = float(d2[np.arange(n), labels].sum())
    return KMeansResult(Labeling(labels, k), centroids, inertia, restart_index, tuple(history))


def kmeans_restarts(points: np.ndarray, k: int, restarts: int = 10, seed: int = 0,
                    max_iters: int = 300) -> RestartsResult:
    """Run k-means from `restarts` derived seeds; best = lowest inertia.
    All runs are kept for averaged-metric reporting."""
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    children = np.random.SeedSequence(seed).spawn(restarts)
    runs = tuple(
        kmeans(points, k, max_iters=max_iters,
               seed=np.random.default_rng(children[r]), restart_index=r)
        for r in range(restarts)
    )
    best = min(runs, key=lambda r: (r.inertia, r.restart_index))
    return RestartsResult(best, runs)


def _check_pair(a: Labeling, b: Labeling, min_n: int = 1) -> int:
    if len(a) != len(b):
        raise DimensionError(f"labeling lengths differ: {len(a)} vs {len(b)}")
    if len(a) < min_n:
        raise ConfigError(f"need at least {min_n} points")
    return len(a)


def rand_index(a: Labeling, b: Labeling) -> float:
    """Fraction of point pairs co-clustered in both or separated in both."""
    n = _check_pair(a, b, min_n=2)
    cont = _contingency(a, b)
    same_both = np.sum(cont * (cont - 1)) / 2.0
    same_a = sum(np.sum(row) * (np.sum(row) - 1) / 2.0 for row in cont)
    same_b = sum(np.sum(col) * (np.sum(col) - 1) / 2.0 for col in cont.T)
    pairs = n * (n - 1) / 2.0
    disagree = (same_a - same_both) + (same_b - same_both)
    return float((pairs - disagree) / pairs)


def _contingency(a: Labeling, b: Labeling) -> np.ndarray:
    cont = np.zeros((a.k, b.k), dtype=np.int64)
    np.add.at(cont, (a.assignments, b.assignments), 1)
    return cont


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def _nmi_normalizer(ha: float, hb: float) -> float:
    return (ha + hb) / 2.0


def nmi(a: Labeling, b: Labeling) -> float:
    """Mutual information over the contingency table (natural logs),
    normalized by the arithmetic mean of the entropies. Two single-cluster
    labelings score 1.0 by convention."""
    n = _check_pair(a, b, min_n=1)
    cont = _contingency(a, b)
    ha = _entropy(cont.sum(axis=1), n)
    hb = _entropy(cont.sum(axis=0), n)
    denom = _nmi_normalizer(ha, hb)
    if denom == 0.0:
        return 1.0
    pa = cont.sum(axis=1) / n
    pb = cont.sum(axis=0) / n
    mi = 0.0
    for i in range(cont.shape[0]):
        for j in range(cont.shape[1]):
            if cont[i, j] > 0:
                pij = cont[i, j] / n
                mi += pij * np.log(pij / (pa[i] * pb[j]))
    return float(min(1.0, max(0.0, mi / denom)))


def cross_clustering_matrix(predicted: list[Labeling], truths: list[Labeling]):
    """Entry (i, j) = (nmi, rand_index) of predicted_i against truth_j."""
    return [[(nmi(p, t), rand_index(p, t)) for t in truths] for p in predicted]

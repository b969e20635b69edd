import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import ClusteringError, ContractError
from .rng import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterAssignment:
    """
    Result of k-means on the rows of a point matrix.

    Labels are canonical: cluster ids are numbered in order of first
    appearance along the rows, and ``centers`` follow the same numbering.
    ``rss_history`` is the within-cluster sum of squares after every update
    step of the winning run.
    """
    labels: np.ndarray
    centers: np.ndarray
    rss: float
    restarts_used: int
    converged: bool
    rss_history: Tuple[float, ...] = ()

    @property
    def m(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class PruningProfile:
    """Bottom-up pruning distances d_K(U) <= ... <= d_2(U) and the removal order"""
    distances: np.ndarray      # distances[j] = d_{K-j}
    removed: Tuple[int, ...]

    @property
    def K(self) -> int:
        return len(self.distances) + 1

    def d(self, k: int) -> float:
        if not 2 <= k <= self.K:
            raise ContractError(f"d_k is defined for 2 <= k <= {self.K}")
        return float(self.distances[self.K - k])


@dataclass(frozen=True)
class NspReport:
    holds: bool
    split: Dict[int, Dict[int, int]] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise ContractError(f"points must be an n x d array, got shape {points.shape}")
    return points


def _centroids(points: np.ndarray, labels: np.ndarray, m: int) -> np.ndarray:
    sums = np.zeros((m, points.shape[1]))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=m)
    return sums / np.maximum(counts, 1)[:, None]


def _rss(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((points - centers[labels]) ** 2))


def _plus_plus(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = cdist(points, points[chosen], "sqeuclidean").ravel()
    for _ in range(1, m):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(n, p=closest / total))
        else:
            pick = int(rng.integers(n))
        chosen.append(pick)
        closest = np.minimum(closest, cdist(points, points[[pick]], "sqeuclidean").ravel())
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, labels: np.ndarray, centers: np.ndarray,
                  m: int) -> np.ndarray:
    """Give every empty cluster the point farthest from its own center"""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=m)
    for empty in np.flatnonzero(counts == 0):
        spread = np.sum((points - centers[labels]) ** 2, axis=1)
        spread[counts[labels] < 2] = -1.0
        seized = int(np.argmax(spread))
        counts[labels[seized]] -= 1
        labels[seized] = empty
        counts[empty] = 1
        centers = centers.copy()
        centers[empty] = points[seized]
    return labels


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int):
    m = centers.shape[0]
    labels = None
    history: List[float] = []
    converged = False
    for _ in range(max_iter):
        # argmin keeps the lowest center index on ties
        assigned = np.argmin(cdist(points, centers, "sqeuclidean"), axis=1)
        assigned = _repair_empty(points, assigned, centers, m)
        if labels is not None and np.array_equal(assigned, labels):
            converged = True
            break
        labels = assigned
        centers = _centroids(points, labels, m)
        history.append(_rss(points, labels, centers))
    return labels, centers, history, converged


def _canonical(labels: np.ndarray, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    relabel = np.empty(centers.shape[0], dtype=np.int64)
    relabel[order] = np.arange(len(order))
    return relabel[labels], centers[order]


def kmeans(points, m: int, restarts: int = 20, max_iter: int = 300, seed: int = 0,
           key: Sequence[int] = (),
           candidates: Optional[Iterable[np.ndarray]] = None) -> ClusterAssignment:
    """
    Best-of-restarts Lloyd's algorithm with k-means++ seeding.

    Args:
        points: n x d array (a 1-d array is read as d = 1).
        m: Number of clusters, 1 <= m <= n.
        restarts: Number of k-means++ starts.
        max_iter: Lloyd iterations per start; a start converges when no label
            changes.
        seed: Base seed; start r draws from ``stream(seed, *key, r)``.
        key: Extra stream keys so callers can give each use its own streams.
        candidates: Extra initial labelings run through Lloyd's next to the
            random starts.

    Raises:
        ClusteringError: Fewer points than clusters.
    """
    points = _as_points(points)
    n = points.shape[0]
    if m < 1 or n < m:
        raise ClusteringError(f"cannot form {m} clusters from {n} points")

    if m == 1:
        center = points.mean(axis=0, keepdims=True)
        labels = np.zeros(n, dtype=np.int64)
        rss = _rss(points, labels, center)
        return ClusterAssignment(labels, center, rss, 0, True, (rss,))

    runs = []
    for restart in range(restarts):
        rng = stream(seed, *key, restart)
        runs.append(_lloyd(points, _plus_plus(points, m, rng), max_iter))
    for candidate in candidates or ():
        candidate = np.asarray(candidate, dtype=np.int64)
        start = _centroids(points, candidate, m)
        runs.append(_lloyd(points, start, max_iter))

    best_rss, best = np.inf, None
    for labels, centers, history, converged in runs:
        rss = _rss(points, labels, centers)
        if rss < best_rss:
            best_rss, best = rss, (labels, centers, history, converged)

    labels, centers, history, converged = best
    if not converged:
        logger.debug("best k-means run stopped at max_iter=%d", max_iter)
    labels, centers = _canonical(labels, centers)
    return ClusterAssignment(
        labels=labels,
        centers=centers,
        rss=_rss(points, labels, centers),
        restarts_used=len(runs),
        converged=converged,
        rss_history=tuple(history),
    )


def pruning_distances(U) -> PruningProfile:
    """
    Repeatedly find the closest pair of remaining rows, record its distance and
    drop the larger row index of the pair (first pair in lexicographic order
    on ties), until two rows are left and measured.
    """
    U = _as_points(U)
    if U.shape[0] < 2:
        raise ContractError("pruning needs at least two rows")
    alive = list(range(U.shape[0]))
    distances, removed = [], []
    while len(alive) >= 2:
        # pdist walks pairs (i, j), i < j, in lexicographic order
        condensed = pdist(U[alive])
        flat = int(np.argmin(condensed))
        i, j = np.triu_indices(len(alive), k=1)
        distances.append(float(condensed[flat]))
        removed.append(alive[j[flat]])
        del alive[j[flat]]
    return PruningProfile(distances=np.asarray(distances), removed=tuple(removed))


def rss_delta(points, A: Sequence[int], B: Sequence[int], C: Sequence[int]) -> float:
    """Exact change of the two-cluster RSS when the points C move from cluster A to B"""
    points = _as_points(points)
    A, B, C = (np.unique(np.asarray(s, dtype=np.int64)) for s in (A, B, C))
    if len(C) == 0 or not np.all(np.isin(C, A)):
        raise ContractError("C must be a nonempty subset of A")
    if len(C) == len(A):
        raise ContractError("C must be a strict subset of A")
    if np.intersect1d(A, B).size:
        raise ContractError("A and B must be disjoint")

    mean_c = points[C].mean(axis=0)
    gain = 0.0
    if len(B):
        gain = len(B) * len(C) / (len(B) + len(C)) * np.sum((mean_c - points[B].mean(axis=0)) ** 2)
    loss = len(A) * len(C) / (len(A) - len(C)) * np.sum((mean_c - points[A].mean(axis=0)) ** 2)
    return float(gain - loss)


def nsp_check(assignment, true_labels) -> NspReport:
    """True iff no true community is split across estimated clusters"""
    estimated = assignment.labels if isinstance(assignment, ClusterAssignment) else assignment
    estimated = np.asarray(estimated)
    true_labels = np.asarray(true_labels)
    if estimated.shape != true_labels.shape:
        raise ContractError("assignment and true labels differ in length")

    split = {}
    for community in np.unique(true_labels):
        clusters, sizes = np.unique(estimated[true_labels == community], return_counts=True)
        if len(clusters) > 1:
            split[int(community)] = {int(c): int(s) for c, s in zip(clusters, sizes)}
    return NspReport(holds=not split, split=split)

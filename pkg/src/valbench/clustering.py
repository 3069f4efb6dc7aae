"""K-means clustering and the two cluster-quality statistics validators need.

K-means uses k-means++ seeding with 10 restarts, a 300-iteration cap and a
relative inertia tolerance of 1e-4 (the de facto defaults of standard
toolkits). Restarts are combined by minimum inertia with the lowest restart
index breaking ties, so results are deterministic for a fixed seed no matter
how restarts are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "ClusterAssignment",
    "kmeans",
    "adjusted_mutual_information",
    "silhouette_score",
]


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # (n,) cluster index per point
    centroids: np.ndarray  # (k, d)
    inertia: float  # sum of squared distances to assigned centroids
    n_iter: int
    inertia_history: tuple[float, ...]  # winning restart, non-increasing
    restart_index: int


def _pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; degenerate all-duplicate data falls back to uniform picks."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[int(rng.integers(n))]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = x[idx]
        np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1), out=d2)
    return centroids


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    *,
    n_restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-4,
) -> ClusterAssignment:
    """Lloyd's algorithm, best of `n_restarts` k-means++ starts.

    Each restart stops at an assignment fixpoint, when the relative inertia
    improvement drops below `tol`, or at `max_iter`. An empty cluster is
    reseeded at the point farthest from its assigned centroid. Restart r draws
    from its own generator seeded by (seed, r), so the outcome is independent
    of restart scheduling.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"points must be a non-empty 2-D array, got shape {x.shape}")
    n, d = x.shape
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds number of points n={n}")

    r_total = n_restarts
    cents = np.empty((r_total, k, d))
    for r in range(r_total):
        cents[r] = _pp_init(x, k, np.random.default_rng((seed, r)))

    x2 = (x * x).sum(axis=1)
    labels = np.full((n, r_total), -1, dtype=np.int64)
    inertia = np.full(r_total, np.inf)
    prev_inertia = np.full(r_total, np.inf)
    histories: list[list[float]] = [[] for _ in range(r_total)]
    n_iters = np.zeros(r_total, dtype=np.int64)
    class_range = np.arange(k)
    active = np.arange(r_total)  # restarts still iterating

    for it in range(max_iter):
        n_active = active.size
        flat = cents[active].reshape(n_active * k, d)
        d2 = x2[:, None] - 2.0 * (x @ flat.T) + (flat * flat).sum(axis=1)[None, :]
        d2 = d2.reshape(n, n_active, k)
        new_labels = d2.argmin(axis=2)
        min_d2 = np.take_along_axis(d2, new_labels[:, :, None], axis=2)[:, :, 0]
        np.maximum(min_d2, 0.0, out=min_d2)
        new_inertia = min_d2.sum(axis=0)

        for pos, r in enumerate(active):
            histories[r].append(float(new_inertia[pos]))
            n_iters[r] = it + 1
        fixpoint = (new_labels == labels[:, active]).all(axis=0)
        small_gain = new_inertia >= prev_inertia[active] * (1.0 - tol)
        labels[:, active] = new_labels
        inertia[active] = new_inertia
        prev_inertia[active] = new_inertia
        keep = ~(fixpoint | small_gain)
        if not keep.any():
            break

        onehot = (new_labels[:, keep, None] == class_range[None, None, :]).astype(np.float64)
        n_keep = int(keep.sum())
        counts = onehot.sum(axis=0)  # (n_keep, k)
        sums = (onehot.reshape(n, n_keep * k).T @ x).reshape(n_keep, k, d)
        safe = np.where(counts == 0, 1.0, counts)
        new_cents = sums / safe[:, :, None]
        kept_positions = np.flatnonzero(keep)
        for row, (pos, restart) in enumerate(zip(kept_positions, active[keep])):
            empty = np.flatnonzero(counts[row] == 0)
            if empty.size:
                farthest = np.argsort(-min_d2[:, pos], kind="stable")
                for slot, c in enumerate(empty):
                    new_cents[row, c] = x[farthest[slot % n]]
            cents[restart] = new_cents[row]
        active = active[keep]

    best = int(np.argmin(inertia))
    return ClusterAssignment(
        labels=labels[:, best].copy(),
        centroids=cents[best].copy(),
        inertia=float(inertia[best]),
        n_iter=int(n_iters[best]),
        inertia_history=tuple(histories[best]),
        restart_index=best,
    )


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _mutual_information(table: np.ndarray, n: int) -> float:
    a = table.sum(axis=1, keepdims=True).astype(np.float64)
    b = table.sum(axis=0, keepdims=True).astype(np.float64)
    nz = table > 0
    nij = table[nz].astype(np.float64)
    outer = (a @ b)[nz]
    return float((nij / n * np.log(n * nij / outer)).sum())


def _expected_mutual_information(a_counts: np.ndarray, b_counts: np.ndarray, n: int) -> float:
    """Exact E[MI] under the permutation (hypergeometric) model."""
    lg_n = gammaln(n + 1)
    emi = 0.0
    for ai in a_counts:
        lg_ai = gammaln(ai + 1) + gammaln(n - ai + 1)
        for bj in b_counts:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            term = nij / n * (np.log(n) + np.log(nij) - np.log(ai) - np.log(bj))
            logp = (
                lg_ai
                + gammaln(bj + 1)
                + gammaln(n - bj + 1)
                - lg_n
                - gammaln(nij + 1)
                - gammaln(ai - nij + 1)
                - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float((term * np.exp(logp)).sum())
    return emi


def _label_entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0].astype(np.float64) / n
    return float(-(p * np.log(p)).sum())


def adjusted_mutual_information(a: np.ndarray, b: np.ndarray) -> float:
    """AMI = (MI - E[MI]) / (mean(H(a), H(b)) - E[MI]); 0 when the denominator is 0.

    E[MI] is computed exactly under the permutation model, and the
    normalization uses the arithmetic mean of the two label entropies.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length: {a.shape} vs {b.shape}")
    if a.size < 1:
        raise ValueError("label vectors must be non-empty")
    n = a.size
    table = _contingency(a, b)
    mi = _mutual_information(table, n)
    emi = _expected_mutual_information(table.sum(axis=1), table.sum(axis=0), n)
    h_mean = 0.5 * (_label_entropy(table.sum(axis=1), n) + _label_entropy(table.sum(axis=0), n))
    denom = h_mean - emi
    if abs(denom) < 1e-15:
        return 0.0
    return float((mi - emi) / denom)


def _pairwise_distances(x: np.ndarray) -> np.ndarray:
    # Centering first keeps the Gram expansion accurate under large translations.
    c = x - x.mean(axis=0, keepdims=True)
    sq = (c * c).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (c @ c.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient with Euclidean distances.

    Per sample: a = mean intra-cluster distance (excluding self), b = smallest
    mean distance to another cluster, s = (b - a) / max(a, b). Samples in
    singleton clusters contribute 0, as does the a = b = 0 case.
    """
    x = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError("points and labels differ in length")
    uniq, idx = np.unique(y, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette requires at least 2 distinct clusters")
    n = x.shape[0]
    dist = _pairwise_distances(x)
    counts = np.bincount(idx, minlength=uniq.size).astype(np.float64)
    # sum of distances from every point to each cluster, via one matmul
    onehot = np.zeros((n, uniq.size))
    onehot[np.arange(n), idx] = 1.0
    cluster_sums = dist @ onehot

    own = idx
    own_counts = counts[own]
    singleton = own_counts <= 1
    a = np.zeros(n)
    np.divide(
        cluster_sums[np.arange(n), own],
        own_counts - 1,
        out=a,
        where=~singleton,
    )
    mean_to = cluster_sums / counts[None, :]
    mean_to[np.arange(n), own] = np.inf
    b = mean_to.min(axis=1)

    denom = np.maximum(a, b)
    s = np.zeros(n)
    np.divide(b - a, denom, out=s, where=denom > 0)
    s[singleton] = 0.0
    return float(s.mean())

"""K-means on pooled feature vectors and elbow selection of the cluster count.

The selected count becomes the number of HMM states. Initialization is
k-means++ drawn over a content-sorted copy of the data, so shuffling the
input rows does not change the result for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels


class ClusterError(ValueError):
    pass


@dataclass
class Clustering:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    wcss: float
    history: list[float] = field(default_factory=list)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


@dataclass
class ElbowCurve:
    k_values: list[int]
    wcss_values: list[float]
    selected_k: int
    distances: list[float] = field(default_factory=list)
    clusterings: dict[int, Clustering] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        rows = ["k,wcss"] + [f"{k},{w!r}" for k, w in zip(self.k_values, self.wcss_values)]
        return "\n".join(rows) + "\n"


def _cost(X, labels, C) -> float:
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _nearest(X, C):
    return _kernels.kmeans_assign(X, np.ascontiguousarray(C))


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _nearest(X, centers[:1])[1]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[j] = X[idx]
        closest = np.minimum(closest, _nearest(X, centers[j:j + 1])[1])
    return centers


def _repair_empty(X, labels, C, k):
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        diff = X[members] - C[big]
        far = members[int(np.argmax(np.einsum("ij,ij->i", diff, diff)))]
        labels[far] = j
        C[j] = X[far]
        counts[big] -= 1
        counts[j] = 1
    return labels


def _lloyd(X, C, max_iter, tol):
    """Alternate mean and assignment steps; history[i] is the objective after step i."""
    k = C.shape[0]
    C = C.copy()
    labels, _ = _nearest(X, C)
    history = []
    for _ in range(max_iter):
        labels = _repair_empty(X, labels, C, k)
        sums, counts = _kernels.kmeans_sums(X, labels, k)
        C = sums / counts[:, None]
        new_labels, mind = _nearest(X, C)
        history.append(float(mind.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        if len(history) > 1 and history[-2] - history[-1] <= tol * history[-1]:
            break
    if np.any(np.bincount(new_labels, minlength=k) == 0):
        # duplicate centroids can tie; hand the tied cluster its own point so k stays fixed
        new_labels = _repair_empty(X, new_labels.copy(), C, k)
        sums, counts = _kernels.kmeans_sums(X, new_labels, k)
        C = sums / counts[:, None]
        history.append(_cost(X, new_labels, C))
    return C, new_labels, history


def kmeans(X, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300,
           init: Sequence[np.ndarray] = (), tol: float = 1e-6) -> Clustering:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Each run iterates until the assignment is a fixed point, the relative
    objective decrease falls below ``tol`` or ``max_iter`` is reached.
    ``init`` supplies extra starting centroid sets that compete with the
    random restarts; the elbow scan uses it for warm starts.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClusterError("k-means needs a non-empty 2-D array of vectors")
    n = X.shape[0]
    if k < 1:
        raise ClusterError(f"k must be >= 1, got {k}")
    if k > n:
        raise ClusterError(f"k={k} exceeds the number of vectors ({n})")
    if restarts < 1:
        raise ClusterError("need at least one restart")

    # canonical content order: initialization must not depend on row positions
    order = np.lexsort(X.T[::-1])
    Xs = np.ascontiguousarray(X[order])

    starts = []
    for child in np.random.SeedSequence(seed).spawn(restarts):
        starts.append(_kmeanspp(Xs, k, np.random.default_rng(child)))
    starts.extend(np.asarray(c, dtype=np.float64) for c in init)

    best = None
    for C0 in starts:
        if C0.shape != (k, X.shape[1]):
            raise ClusterError(f"initial centroids of shape {C0.shape}, expected {(k, X.shape[1])}")
        C, labels, hist = _lloyd(Xs, C0, max_iter, tol)
        if best is None or hist[-1] < best[2][-1]:
            best = (C, labels, hist)

    C, labels_sorted, hist = best
    labels = np.empty(n, dtype=np.intp)
    labels[order] = labels_sorted
    return Clustering(k=k, centroids=C, assignments=labels, wcss=_cost(X, labels, C), history=hist)


def assign(clustering: Clustering, X) -> Clustering:
    """Label every row of ``X`` with its nearest centroid of ``clustering``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = clustering.centroids
    labels, _ = _nearest(X, C)
    return Clustering(k=clustering.k, centroids=C, assignments=labels, wcss=_cost(X, labels, C))


def subsample(X, max_points: int | None) -> np.ndarray:
    """Deterministic evenly strided subset of at most ``max_points`` rows."""
    X = np.asarray(X)
    if max_points is None or X.shape[0] <= max_points:
        return X
    idx = np.linspace(0, X.shape[0] - 1, max_points).round().astype(np.intp)
    return X[np.unique(idx)]


def chord_distances(k_values, wcss_values) -> np.ndarray:
    """Distance of each normalized (k, wcss) point from the endpoint chord."""
    k = np.asarray(k_values, dtype=np.float64)
    w = np.asarray(wcss_values, dtype=np.float64)
    x = (k - k[0]) / (k[-1] - k[0])
    span = w.max() - w.min()
    y = (w - w.min()) / span if span > 0 else np.zeros_like(w)
    x0, y0, x1, y1 = x[0], y[0], x[-1], y[-1]
    num = np.abs((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0)
    den = np.hypot(x1 - x0, y1 - y0)
    return num / den if den > 0 else np.zeros_like(x)


def select_elbow(k_values, wcss_values, atol: float = 1e-12) -> int:
    """Interior k farthest from the chord; near-ties go to the smallest k."""
    d = chord_distances(k_values, wcss_values)[1:-1]
    if d.size == 0:
        raise ClusterError("elbow needs at least three k values")
    best = d.max()
    return int(k_values[1 + int(np.flatnonzero(d >= best - atol)[0])])


def elbow_select(X, k_range: tuple[int, int] = (1, 10), seed: int = 0, restarts: int = 10,
                 max_iter: int = 300, override: int | None = None, tol: float = 1e-6) -> ElbowCurve:
    """Scan k over the inclusive ``k_range`` and pick the elbow.

    Each k also gets a warm start from the previous best centroids plus the
    point farthest from them, which keeps the curve non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    lo, hi = int(k_range[0]), int(k_range[1])
    if hi - lo + 1 < 3:
        raise ClusterError(f"k range {lo}..{hi} is too short for the elbow rule (need >= 3 values)")
    if lo < 1 or hi > X.shape[0]:
        raise ClusterError(f"k range {lo}..{hi} must lie within 1..{X.shape[0]}")
    ks, ws, fits = [], [], {}
    prev = None
    for k in range(lo, hi + 1):
        init = []
        if prev is not None:
            diff = X - prev.centroids[prev.assignments]
            far = int(np.argmax(np.einsum("ij,ij->i", diff, diff)))
            init.append(np.vstack([prev.centroids, X[far]]))
        fit = kmeans(X, k, seed=seed, restarts=restarts, max_iter=max_iter, init=init, tol=tol)
        ks.append(k)
        ws.append(fit.wcss)
        fits[k] = fit
        prev = fit
    dist = chord_distances(ks, ws)
    chosen = select_elbow(ks, ws)
    if override is not None:
        if override not in fits:
            raise ClusterError(f"state override {override} outside the scanned k range {lo}..{hi}")
        chosen = int(override)
    return ElbowCurve(k_values=ks, wcss_values=ws, selected_k=chosen, distances=list(dist), clusterings=fits)

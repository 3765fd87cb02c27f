"""Window-space PCA: learn a p x M projection and turn windows into features.

Each column of a segment matrix is one observation of an M-dimensional
vector. The projection rows are the dominant eigenvectors of the window
covariance, so feature ``j`` of window ``n`` is the coordinate of that
window along the j-th principal direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .segment import SegmentMatrix


class PCAError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionMatrix:
    W: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray
    centered: bool = True
    channel_label: str = ""

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def M(self) -> int:
        return self.W.shape[1]


@dataclass
class FeatureSequence:
    """N feature vectors (rows) computed from one snapshot."""

    vectors: np.ndarray
    source: int | None = None

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(U) -> np.ndarray:
    if isinstance(U, SegmentMatrix):
        return U.U
    return np.asarray(U, dtype=np.float64)


@dataclass
class CovarianceAccumulator:
    """Streaming window covariance so the training pool is never stacked in memory.

    Sums are taken about a fixed shift (the first batch's mean) which keeps
    the one-pass formula well conditioned for signals with a DC offset.
    """

    M: int
    centered: bool = True
    n: int = 0
    _shift: np.ndarray | None = None
    _s1: np.ndarray = field(init=False)
    _s2: np.ndarray = field(init=False)

    def __post_init__(self):
        self._s1 = np.zeros(self.M)
        self._s2 = np.zeros((self.M, self.M))

    def add(self, U) -> None:
        X = _as_matrix(U)
        if X.shape[0] != self.M:
            raise PCAError(f"window length {X.shape[0]} does not match accumulator length {self.M}")
        if self._shift is None:
            self._shift = X.mean(axis=1) if self.centered else np.zeros(self.M)
        Xs = X - self._shift[:, None]
        self._s1 += Xs.sum(axis=1)
        self._s2 += Xs @ Xs.T
        self.n += X.shape[1]

    def mean(self) -> np.ndarray:
        if not self.centered:
            return np.zeros(self.M)
        return self._shift + self._s1 / self.n

    def covariance(self) -> np.ndarray:
        if self.centered:
            if self.n < 2:
                raise PCAError("need at least two windows for a covariance")
            d = self._s1 / self.n
            R = (self._s2 - self.n * np.outer(d, d)) / (self.n - 1)
        else:
            R = self._s2 / self.n
        return 0.5 * (R + R.T)


def eigh_descending(R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition with eigenvalues descending.

    Columns of the returned vector matrix are sign-normalized so that each
    eigenvector's largest-magnitude entry is nonnegative; equal eigenvalues
    keep the solver's original index order.
    """
    vals, vecs = np.linalg.eigh(R)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[pivot, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vals, vecs * signs


def projection_from_covariance(R, p: int, mean, centered=True, channel_label="") -> ProjectionMatrix:
    M = R.shape[0]
    if not 1 <= p < M:
        raise PCAError(f"need 1 <= p < M, got p={p}, M={M}")
    vals, vecs = eigh_descending(R)
    return ProjectionMatrix(
        W=np.ascontiguousarray(vecs[:, :p].T),
        eigenvalues=vals,
        mean=np.asarray(mean, dtype=np.float64),
        centered=centered,
        channel_label=channel_label,
    )


def fit_pca(U, p: int, center: bool = True, channel_label: str = "") -> ProjectionMatrix:
    """Fit the projection on one segment matrix or a pool of them.

    Parameters
    ----------
    U : SegmentMatrix, ndarray or sequence of either
        Windows as columns. A sequence is pooled as if concatenated
        column-wise.
    p : int
        Number of retained components, ``p < M``.
    center : bool
        Subtract the pooled window mean before forming the covariance
        (``1/(N-1)`` normalization). Without centering the second-moment
        matrix ``U U^T / N`` is decomposed instead.
    """
    pool = list(U) if isinstance(U, (list, tuple)) else [U]
    if not pool:
        raise PCAError("no segment matrices to fit")
    M = _as_matrix(pool[0]).shape[0]
    if not 1 <= p < M:
        raise PCAError(f"need 1 <= p < M, got p={p}, M={M}")
    acc = CovarianceAccumulator(M, centered=center)
    for item in pool:
        acc.add(item)
    if acc.n <= M:
        raise PCAError(f"need more windows than window length (N={acc.n}, M={M})")
    return projection_from_covariance(acc.covariance(), p, acc.mean(), center, channel_label)


def project(W: ProjectionMatrix, U, source: int | None = None) -> FeatureSequence:
    X = _as_matrix(U)
    if X.ndim != 2 or X.shape[0] != W.M:
        raise PCAError(f"projection of shape {W.W.shape} cannot act on segment matrix of shape {X.shape}")
    if W.centered:
        X = X - W.mean[:, None]
    return FeatureSequence(vectors=(W.W @ X).T, source=source)


def variance_retained(W: ProjectionMatrix) -> float:
    lam = np.clip(W.eigenvalues, 0.0, None)
    total = lam.sum()
    if total <= 0:
        return 1.0
    return float(lam[: W.p].sum() / total)


def concat_features(per_channel: Sequence[FeatureSequence]) -> FeatureSequence:
    """Join per-channel features window by window, in channel order."""
    seqs = list(per_channel)
    if not seqs:
        raise PCAError("nothing to concatenate")
    n = len(seqs[0])
    src = seqs[0].source
    for s in seqs[1:]:
        if len(s) != n:
            raise PCAError(f"sequence lengths differ: {n} vs {len(s)}")
        if s.source != src:
            raise PCAError(f"sequence sources differ: {src} vs {s.source}")
    if len(seqs) == 1:
        return FeatureSequence(vectors=seqs[0].vectors.copy(), source=src)
    return FeatureSequence(vectors=np.hstack([s.vectors for s in seqs]), source=src)


def stack(sequences: Iterable[FeatureSequence]) -> tuple[np.ndarray, list[int]]:
    """Pool sequences into one matrix plus the per-sequence lengths."""
    seqs = list(sequences)
    return np.vstack([s.vectors for s in seqs]), [len(s) for s in seqs]

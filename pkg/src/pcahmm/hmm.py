"""Hidden Markov model with diagonal-Gaussian emissions.

Covers initialization from a k-means clustering, Baum-Welch training over
many sequences, forward log-likelihood and Viterbi decoding. Recursions
run on per-step rescaled emission densities (see :mod:`pcahmm._kernels`),
so nothing multiplies raw probabilities across a whole sequence.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .cluster import Clustering
from .pca import FeatureSequence

log = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
VAR_FLOOR_REL = 1e-6
VAR_FLOOR_ABS = 1e-12


class HMMError(ValueError):
    pass


@dataclass(frozen=True)
class HmmModel:
    """Transition matrix ``A``, initial distribution ``pi`` and per-state Gaussians.

    ``means`` and ``variances`` are S x d; ``var_floor`` is the per-dimension
    lower bound applied to every variance update.
    """

    A: np.ndarray
    pi: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    var_floor: np.ndarray

    def __post_init__(self):
        S, d = self.means.shape
        if self.A.shape != (S, S) or self.pi.shape != (S,) or self.variances.shape != (S, d):
            raise HMMError("inconsistent HMM parameter shapes")
        if self.var_floor.shape != (d,) or np.any(self.var_floor <= 0):
            raise HMMError("variance floor must be a positive vector of length d")

    @property
    def S(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def check(self, atol: float = 1e-9) -> None:
        """Raise unless the stochastic and floor invariants hold."""
        if np.any(self.A < 0) or np.any(self.pi < 0):
            raise HMMError("negative probability")
        if not np.allclose(self.A.sum(axis=1), 1.0, rtol=0, atol=atol):
            raise HMMError("transition rows do not sum to one")
        if abs(self.pi.sum() - 1.0) > atol:
            raise HMMError("initial distribution does not sum to one")
        if np.any(self.variances < self.var_floor):
            raise HMMError("variance below floor")


@dataclass
class TrainingTrace:
    ll_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _obs(model: HmmModel, sequence) -> np.ndarray:
    X = sequence.vectors if isinstance(sequence, FeatureSequence) else np.asarray(sequence, dtype=np.float64)
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise HMMError("empty observation sequence")
    if X.shape[1] != model.d:
        raise HMMError(f"observation dimension {X.shape[1]} does not match model dimension {model.d}")
    return X


def log_emission(model: HmmModel, X: np.ndarray) -> np.ndarray:
    """Per-step, per-state Gaussian log densities, shape (T, S)."""
    const = -0.5 * (model.d * LOG_2PI + np.log(model.variances).sum(axis=1))
    D = X[:, None, :] - model.means[None, :, :]
    quad = np.einsum("tsd,tsd->ts", D, D / model.variances[None, :, :])
    return const[None, :] - 0.5 * quad


def _rescale(logb):
    off = logb.max(axis=1)
    return np.ascontiguousarray(np.exp(logb - off[:, None])), off


def _log_forward(logb, A, pi) -> float:
    with np.errstate(divide="ignore"):
        la = np.log(pi) + logb[0]
    for t in range(1, logb.shape[0]):
        m = la.max()
        if not np.isfinite(m):
            return -np.inf
        la = m + np.log(np.exp(la - m) @ A) + logb[t]
    m = la.max()
    return float(m + np.log(np.exp(la - m).sum())) if np.isfinite(m) else -np.inf


def forward_loglik(model: HmmModel, sequence) -> float:
    """log P(O | model) in nats; no normalization by sequence length."""
    X = _obs(model, sequence)
    logb = log_emission(model, X)
    b, off = _rescale(logb)
    _, scale = _kernels.forward(b, np.ascontiguousarray(model.A), np.ascontiguousarray(model.pi))
    if np.all(scale > 0):
        return float(np.log(scale).sum() + off.sum())
    return _log_forward(logb, model.A, model.pi)


def viterbi(model: HmmModel, sequence, return_score: bool = False):
    """Most probable state path; ties resolve to the lowest state index.

    With ``return_score`` the path's joint log-probability is returned too.
    """
    X = _obs(model, sequence)
    with np.errstate(divide="ignore"):
        logA = np.ascontiguousarray(np.log(model.A))
        logpi = np.ascontiguousarray(np.log(model.pi))
    path, score = _kernels.viterbi(np.ascontiguousarray(log_emission(model, X)), logA, logpi)
    path = np.asarray(path, dtype=np.intp)
    return (path, float(score)) if return_score else path


def variance_floor(X: np.ndarray, rel: float = VAR_FLOOR_REL, floor: float = VAR_FLOOR_ABS) -> np.ndarray:
    return np.maximum(rel * np.var(X, axis=0), floor)


def init_from_clusters(clustering: Clustering, X, lengths: Sequence[int] | None = None) -> HmmModel:
    """Seed an HMM from cluster assignments of the pooled training vectors.

    ``lengths`` splits the pooled rows of ``X`` back into the original
    sequences so that transition counts never straddle two snapshots.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(clustering.assignments)
    if labels.shape[0] != X.shape[0]:
        raise HMMError("clustering does not cover the training vectors")
    lengths = [X.shape[0]] if lengths is None else list(lengths)
    if sum(lengths) != X.shape[0]:
        raise HMMError("sequence lengths do not add up to the number of vectors")
    S = clustering.k
    floor = variance_floor(X)

    means = np.asarray(clustering.centroids, dtype=np.float64).copy()
    variances = np.empty_like(means)
    for s in range(S):
        members = X[labels == s]
        variances[s] = members.var(axis=0) if len(members) else np.var(X, axis=0)
    variances = np.maximum(variances, floor)

    trans = np.ones((S, S))
    first = np.ones(S)
    start = 0
    for n in lengths:
        seq = labels[start:start + n]
        if n:
            first[seq[0]] += 1
            np.add.at(trans, (seq[:-1], seq[1:]), 1)
        start += n
    return HmmModel(
        A=trans / trans.sum(axis=1, keepdims=True),
        pi=first / first.sum(),
        means=means,
        variances=variances,
        var_floor=floor,
    )


@dataclass
class _Stats:
    S: int
    d: int
    shift: np.ndarray
    ll: float = 0.0
    n_seq: int = 0
    pi: np.ndarray = field(init=False)
    trans: np.ndarray = field(init=False)
    occ: np.ndarray = field(init=False)
    first: np.ndarray = field(init=False)
    second: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pi = np.zeros(self.S)
        self.trans = np.zeros((self.S, self.S))
        self.occ = np.zeros(self.S)
        self.first = np.zeros((self.S, self.d))
        self.second = np.zeros((self.S, self.d))


def _estep(model: HmmModel, sequences: list[np.ndarray]) -> _Stats:
    st = _Stats(model.S, model.d, shift=model.means)
    A = np.ascontiguousarray(model.A)
    pi = np.ascontiguousarray(model.pi)
    for X in sequences:
        b, off = _rescale(log_emission(model, X))
        alpha, scale = _kernels.forward(b, A, pi)
        if not np.all(scale > 0):
            raise HMMError("forward recursion underflowed; every state became unreachable")
        beta = _kernels.backward(b, A, scale)
        gamma = alpha * beta
        gamma /= gamma.sum(axis=1, keepdims=True)
        st.ll += float(np.log(scale).sum() + off.sum())
        st.pi += gamma[0]
        if X.shape[0] > 1:
            st.trans += _kernels.xi_sum(alpha, beta, b, A, scale)
        st.occ += gamma.sum(axis=0)
        # moments about the current means keep the variance update well conditioned
        for s in range(model.S):
            D = X - st.shift[s]
            g = gamma[:, s]
            st.first[s] += g @ D
            st.second[s] += g @ (D * D)
        st.n_seq += 1
    return st


def _mstep(model: HmmModel, st: _Stats) -> HmmModel:
    pi = st.pi / st.n_seq
    rows = st.trans.sum(axis=1, keepdims=True)
    A = np.where(rows > 0, st.trans / np.where(rows > 0, rows, 1.0), model.A)
    means = model.means.copy()
    variances = model.variances.copy()
    live = st.occ > 0
    occ = st.occ[live, None]
    m1 = st.first[live] / occ
    means[live] = st.shift[live] + m1
    variances[live] = st.second[live] / occ - m1 * m1
    variances = np.maximum(variances, model.var_floor)
    return replace(model, A=A, pi=pi, means=means, variances=variances)


def baum_welch(model: HmmModel, sequences, tol: float = 1e-6, max_iter: int = 200) -> tuple[HmmModel, TrainingTrace]:
    """Fit ``model`` to a set of sequences by expectation-maximization.

    Sufficient statistics are summed over sequences; the initial
    distribution is re-estimated from each sequence's first-step posterior.
    Stops when the relative change of the total log-likelihood drops below
    ``tol`` or after ``max_iter`` updates. ``ll_history[i]`` is the total
    log-likelihood after ``i`` updates, and the returned model is the one
    scored by ``ll_history[-1]``.
    """
    if max_iter < 1:
        raise HMMError("max_iter must be at least 1")
    data = [_obs(model, s) for s in sequences]
    if not data:
        raise HMMError("no training sequences")
    trace = TrainingTrace()
    st = _estep(model, data)
    trace.ll_history.append(st.ll)
    for _ in range(max_iter):
        model = _mstep(model, st)
        trace.iterations += 1
        prev = st.ll
        st = _estep(model, data)
        trace.ll_history.append(st.ll)
        if abs(st.ll - prev) < tol * abs(st.ll):
            trace.converged = True
            break
    log.debug("baum-welch: %d iterations, final LL %.6f", trace.iterations, st.ll)
    return model, trace


def sample(model: HmmModel, T: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw one state path and observation sequence of length ``T``."""
    states = np.empty(T, dtype=np.intp)
    states[0] = rng.choice(model.S, p=model.pi)
    for t in range(1, T):
        states[t] = rng.choice(model.S, p=model.A[states[t - 1]])
    obs = model.means[states] + rng.standard_normal((T, model.d)) * np.sqrt(model.variances[states])
    return states, obs

"""Pure numpy HMM recursions; fallback for :mod:`pcahmm._ckernels`.

``b`` is the matrix of per-step rescaled emission densities, shape (T, S),
with each row divided by its maximum so the largest entry is 1. Scaled
recursions follow Rabiner's convention: ``alpha[t]`` sums to one and
``scale[t]`` is the normalizer removed at step ``t``.
"""
import numpy as np


def forward(b, A, pi):
    T, S = b.shape
    alpha = np.empty((T, S))
    scale = np.empty(T)
    a = pi * b[0]
    c = a.sum()
    scale[0] = c
    alpha[0] = a / c if c > 0 else a
    for t in range(1, T):
        a = (alpha[t - 1] @ A) * b[t]
        c = a.sum()
        scale[t] = c
        alpha[t] = a / c if c > 0 else a
    return alpha, scale


def backward(b, A, scale):
    T, S = b.shape
    beta = np.empty((T, S))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (A @ (b[t + 1] * beta[t + 1])) / scale[t + 1]
    return beta


def xi_sum(alpha, beta, b, A, scale):
    right = b[1:] * beta[1:] / scale[1:, None]
    return (alpha[:-1].T @ right) * A


def viterbi(logb, logA, logpi):
    T, S = logb.shape
    delta = logpi + logb[0]
    back = np.zeros((T, S), dtype=np.intp)
    for t in range(1, T):
        cand = delta[:, None] + logA
        # argmax returns the first maximum: lowest index wins ties
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(S)] + logb[t]
    path = np.empty(T, dtype=np.intp)
    path[T - 1] = int(np.argmax(delta))
    best = float(delta[path[T - 1]])
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


def kmeans_assign(X, C, chunk=8192):
    n = X.shape[0]
    labels = np.empty(n, dtype=np.intp)
    mind = np.empty(n)
    for start in range(0, n, chunk):
        block = X[start:start + chunk]
        diff = block[:, None, :] - C[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        labels[start:start + chunk] = np.argmin(d2, axis=1)
        mind[start:start + chunk] = d2[np.arange(block.shape[0]), labels[start:start + chunk]]
    return labels, mind


def kmeans_sums(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    for j in range(k):
        sums[j] = X[labels == j].sum(axis=0)
    return sums, counts

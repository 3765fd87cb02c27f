# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled HMM recursions.

Same signatures and semantics as :mod:`pcahmm._pykernels`; ``b`` holds
per-step rescaled emission densities (each row's maximum is 1).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def forward(const double[:, ::1] b, const double[:, ::1] A, const double[::1] pi):
    cdef Py_ssize_t T = b.shape[0], S = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double acc, c
    alpha_arr = np.empty((T, S), dtype=np.float64)
    scale_arr = np.empty(T, dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[::1] scale = scale_arr

    c = 0.0
    for j in range(S):
        alpha[0, j] = pi[j] * b[0, j]
        c += alpha[0, j]
    scale[0] = c
    if c > 0.0:
        for j in range(S):
            alpha[0, j] /= c
    for t in range(1, T):
        c = 0.0
        for j in range(S):
            acc = 0.0
            for i in range(S):
                acc += alpha[t - 1, i] * A[i, j]
            acc *= b[t, j]
            alpha[t, j] = acc
            c += acc
        scale[t] = c
        if c > 0.0:
            for j in range(S):
                alpha[t, j] /= c
    return alpha_arr, scale_arr


def backward(const double[:, ::1] b, const double[:, ::1] A, const double[::1] scale):
    cdef Py_ssize_t T = b.shape[0], S = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double acc, c
    beta_arr = np.empty((T, S), dtype=np.float64)
    tmp_arr = np.empty(S, dtype=np.float64)
    cdef double[:, ::1] beta = beta_arr
    cdef double[::1] tmp = tmp_arr

    for i in range(S):
        beta[T - 1, i] = 1.0
    for t in range(T - 2, -1, -1):
        c = scale[t + 1]
        for j in range(S):
            tmp[j] = b[t + 1, j] * beta[t + 1, j]
        for i in range(S):
            acc = 0.0
            for j in range(S):
                acc += A[i, j] * tmp[j]
            beta[t, i] = acc / c
    return beta_arr


def xi_sum(const double[:, ::1] alpha, const double[:, ::1] beta,
           const double[:, ::1] b, const double[:, ::1] A, const double[::1] scale):
    cdef Py_ssize_t T = b.shape[0], S = b.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double w
    out_arr = np.zeros((S, S), dtype=np.float64)
    tmp_arr = np.empty(S, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] tmp = tmp_arr

    for t in range(T - 1):
        for j in range(S):
            tmp[j] = b[t + 1, j] * beta[t + 1, j] / scale[t + 1]
        for i in range(S):
            w = alpha[t, i]
            for j in range(S):
                out[i, j] += w * tmp[j]
    for i in range(S):
        for j in range(S):
            out[i, j] *= A[i, j]
    return out_arr


def viterbi(const double[:, ::1] logb, const double[:, ::1] logA, const double[::1] logpi):
    cdef Py_ssize_t T = logb.shape[0], S = logb.shape[1]
    cdef Py_ssize_t t, i, j, arg
    cdef double best, cand
    delta_arr = np.empty((T, S), dtype=np.float64)
    back_arr = np.zeros((T, S), dtype=np.intp)
    path_arr = np.empty(T, dtype=np.intp)
    cdef double[:, ::1] delta = delta_arr
    cdef Py_ssize_t[:, ::1] back = back_arr
    cdef Py_ssize_t[::1] path = path_arr

    for j in range(S):
        delta[0, j] = logpi[j] + logb[0, j]
    for t in range(1, T):
        for j in range(S):
            best = -INFINITY
            arg = 0
            for i in range(S):
                cand = delta[t - 1, i] + logA[i, j]
                # strict comparison keeps the lowest index on ties
                if cand > best:
                    best = cand
                    arg = i
            delta[t, j] = best + logb[t, j]
            back[t, j] = arg
    best = -INFINITY
    arg = 0
    for j in range(S):
        if delta[T - 1, j] > best:
            best = delta[T - 1, j]
            arg = j
    path[T - 1] = arg
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path_arr, best


def kmeans_assign(const double[:, ::1] X, const double[:, ::1] C):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = C.shape[0]
    cdef Py_ssize_t i, j, m, arg
    cdef double best, acc, diff
    labels_arr = np.empty(n, dtype=np.intp)
    mind_arr = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] labels = labels_arr
    cdef double[::1] mind = mind_arr

    for i in range(n):
        best = INFINITY
        arg = 0
        for j in range(k):
            acc = 0.0
            for m in range(d):
                diff = X[i, m] - C[j, m]
                acc += diff * diff
            if acc < best:
                best = acc
                arg = j
        labels[i] = arg
        mind[i] = best
    return labels_arr, mind_arr


def kmeans_sums(const double[:, ::1] X, const Py_ssize_t[::1] labels, Py_ssize_t k):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, m, j
    sums_arr = np.zeros((k, d), dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.intp)
    cdef double[:, ::1] sums = sums_arr
    cdef Py_ssize_t[::1] counts = counts_arr

    for i in range(n):
        j = labels[i]
        counts[j] += 1
        for m in range(d):
            sums[j, m] += X[i, m]
    return sums_arr, counts_arr

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled linear-chain lattice kernels; see _crf_numpy for the reference."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def forward_alphas(double[:, ::1] emissions, double[:, ::1] trans, double[::1] start):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t L = emissions.shape[1]
    alphas_arr = np.empty((T, L))
    cdef double[:, ::1] alphas = alphas_arr
    cdef Py_ssize_t t, i, j
    cdef double peak, acc, s

    for j in range(L):
        alphas[0, j] = start[j] + emissions[0, j]
    for t in range(1, T):
        for j in range(L):
            peak = alphas[t - 1, 0] + trans[0, j]
            for i in range(1, L):
                s = alphas[t - 1, i] + trans[i, j]
                if s > peak:
                    peak = s
            acc = 0.0
            for i in range(L):
                acc += exp(alphas[t - 1, i] + trans[i, j] - peak)
            alphas[t, j] = emissions[t, j] + peak + log(acc)
    return alphas_arr


def backward_betas(double[:, ::1] emissions, double[:, ::1] trans, double[::1] end):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t L = emissions.shape[1]
    betas_arr = np.empty((T, L))
    cdef double[:, ::1] betas = betas_arr
    cdef Py_ssize_t t, i, j
    cdef double peak, acc, s

    for i in range(L):
        betas[T - 1, i] = end[i]
    for t in range(T - 2, -1, -1):
        for i in range(L):
            peak = trans[i, 0] + emissions[t + 1, 0] + betas[t + 1, 0]
            for j in range(1, L):
                s = trans[i, j] + emissions[t + 1, j] + betas[t + 1, j]
                if s > peak:
                    peak = s
            acc = 0.0
            for j in range(L):
                acc += exp(trans[i, j] + emissions[t + 1, j] + betas[t + 1, j] - peak)
            betas[t, i] = peak + log(acc)
    return betas_arr


def log_partition_from_alphas(double[:, ::1] alphas, double[::1] end):
    cdef Py_ssize_t T = alphas.shape[0]
    cdef Py_ssize_t L = alphas.shape[1]
    cdef Py_ssize_t j
    cdef double peak, acc, s

    peak = alphas[T - 1, 0] + end[0]
    for j in range(1, L):
        s = alphas[T - 1, j] + end[j]
        if s > peak:
            peak = s
    acc = 0.0
    for j in range(L):
        acc += exp(alphas[T - 1, j] + end[j] - peak)
    return peak + log(acc)


def transition_expectations(
    double[:, ::1] emissions,
    double[:, ::1] trans,
    double[:, ::1] alphas,
    double[:, ::1] betas,
    double log_z,
):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t L = emissions.shape[1]
    expected_arr = np.zeros((L, L))
    cdef double[:, ::1] expected = expected_arr
    cdef Py_ssize_t t, i, j

    for t in range(T - 1):
        for i in range(L):
            for j in range(L):
                expected[i, j] += exp(
                    alphas[t, i] + trans[i, j] + emissions[t + 1, j]
                    + betas[t + 1, j] - log_z
                )
    return expected_arr


def viterbi_path(
    double[:, ::1] emissions,
    double[:, ::1] trans,
    double[::1] start,
    double[::1] end,
):
    cdef Py_ssize_t T = emissions.shape[0]
    cdef Py_ssize_t L = emissions.shape[1]
    backptr_arr = np.zeros((T, L), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] backptr = backptr_arr
    best_arr = np.empty(L)
    nxt_arr = np.empty(L)
    cdef double[::1] best = best_arr
    cdef double[::1] nxt = nxt_arr
    path_arr = np.empty(T, dtype=np.int64)
    cdef cnp.int64_t[::1] path = path_arr
    cdef Py_ssize_t t, i, j, argbest
    cdef double peak, s, final_best

    for j in range(L):
        best[j] = start[j] + emissions[0, j]
    for t in range(1, T):
        for j in range(L):
            peak = best[0] + trans[0, j]
            argbest = 0
            for i in range(1, L):
                s = best[i] + trans[i, j]
                if s > peak:
                    peak = s
                    argbest = i
            nxt[j] = emissions[t, j] + peak
            backptr[t, j] = argbest
        for j in range(L):
            best[j] = nxt[j]

    final_best = best[0] + end[0]
    argbest = 0
    for j in range(1, L):
        s = best[j] + end[j]
        if s > final_best:
            final_best = s
            argbest = j
    path[T - 1] = argbest
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path_arr, final_best

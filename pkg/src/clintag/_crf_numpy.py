"""Pure-numpy linear-chain lattice kernels.

Reference implementation of the hot recursions; the compiled extension in
``_crf_cy`` computes the same quantities.  All kernels work in the log
domain with max-subtraction.  Shapes: emissions (T, L), trans (L, L) with
trans[i, j] scoring label i -> label j, start/end (L,).
"""

from __future__ import annotations

import numpy as np


def forward_alphas(emissions: np.ndarray, trans: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Forward log-sums: alphas[t, j] = log sum over paths ending in j at t."""
    T, L = emissions.shape
    alphas = np.empty((T, L))
    alphas[0] = start + emissions[0]
    for t in range(1, T):
        scores = alphas[t - 1][:, None] + trans
        peak = scores.max(axis=0)
        alphas[t] = emissions[t] + peak + np.log(np.exp(scores - peak).sum(axis=0))
    return alphas


def backward_betas(emissions: np.ndarray, trans: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Backward log-sums: betas[t, i] = log sum over path suffixes from i at t."""
    T, L = emissions.shape
    betas = np.empty((T, L))
    betas[T - 1] = end
    for t in range(T - 2, -1, -1):
        scores = trans + (emissions[t + 1] + betas[t + 1])[None, :]
        peak = scores.max(axis=1)
        betas[t] = peak + np.log(np.exp(scores - peak[:, None]).sum(axis=1))
    return betas


def log_partition_from_alphas(alphas: np.ndarray, end: np.ndarray) -> float:
    final = alphas[-1] + end
    peak = final.max()
    return float(peak + np.log(np.exp(final - peak).sum()))


def transition_expectations(
    emissions: np.ndarray,
    trans: np.ndarray,
    alphas: np.ndarray,
    betas: np.ndarray,
    log_z: float,
) -> np.ndarray:
    """Expected adjacent-pair counts under the posterior, an (L, L) matrix."""
    T, L = emissions.shape
    expected = np.zeros((L, L))
    for t in range(T - 1):
        joint = alphas[t][:, None] + trans + (emissions[t + 1] + betas[t + 1])[None, :]
        expected += np.exp(joint - log_z)
    return expected


def viterbi_path(
    emissions: np.ndarray, trans: np.ndarray, start: np.ndarray, end: np.ndarray
) -> tuple[np.ndarray, float]:
    """Best path and its score; ties resolved toward the lowest label index."""
    T, L = emissions.shape
    backptr = np.zeros((T, L), dtype=np.int64)
    best = start + emissions[0]
    for t in range(1, T):
        candidates = best[:, None] + trans
        backptr[t] = candidates.argmax(axis=0)
        best = emissions[t] + candidates[backptr[t], np.arange(L)]
    final = best + end
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = final.argmax()
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(final[path[T - 1]])

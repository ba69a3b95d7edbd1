"""Longest-common-subsequence kernels over integer token arrays.

Two interchangeable back ends: a numba-compiled double loop and a numpy
row-vectorized recurrence. ``lcs_length`` and ``best_match`` dispatch on
``gypsum._accel.USE_NUMBA``; the suffixed variants are exposed for the
benchmark and for cross-checking.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


@njit(cache=True)
def _lcs_numba(a, b):
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                cur[j + 1] = prev[j] + 1
            elif prev[j + 1] >= cur[j]:
                cur[j + 1] = prev[j + 1]
            else:
                cur[j + 1] = cur[j]
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _best_match_numba(query, pool, offsets, stop_at):
    # offsets has len(pool_items)+1 entries into the flat ``pool`` array
    best = -1.0
    best_idx = -1
    nq = query.shape[0]
    for k in range(offsets.shape[0] - 1):
        lo, hi = offsets[k], offsets[k + 1]
        nb = hi - lo
        longest = max(nq, nb)
        if longest == 0:
            score = 1.0
        else:
            # LCS <= min(len) bounds the score; skip hopeless pairs
            if min(nq, nb) / longest <= best:
                continue
            score = _lcs_numba(query, pool[lo:hi]) / longest
        if score > best:
            best = score
            best_idx = k
            if best >= stop_at:
                break
    return best_idx, best


def lcs_length_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """Row-vectorized DP: cur = cummax(max(prev[j], match * (prev[j-1] + 1)))."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) == 0 or len(b) == 0:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = np.zeros(len(b) + 1, dtype=np.int64)
    for ai in a:
        step = np.maximum(prev[1:], np.where(b == ai, prev[:-1] + 1, 0))
        prev = np.concatenate(([0], np.maximum.accumulate(step)))
    return int(prev[-1])


def best_match_numpy(query, pool, offsets, stop_at=1.0):
    best, best_idx = -1.0, -1
    nq = len(query)
    for k in range(len(offsets) - 1):
        item = pool[offsets[k]:offsets[k + 1]]
        longest = max(nq, len(item))
        if longest == 0:
            score = 1.0
        else:
            if min(nq, len(item)) / longest <= best:
                continue
            score = lcs_length_numpy(query, item) / longest
        if score > best:
            best, best_idx = score, k
            if best >= stop_at:
                break
    return best_idx, best


def lcs_length_numba(a, b) -> int:
    return int(_lcs_numba(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)))


def best_match_numba(query, pool, offsets, stop_at=1.0):
    idx, score = _best_match_numba(np.asarray(query, dtype=np.int64), np.asarray(pool, dtype=np.int64),
                                   np.asarray(offsets, dtype=np.int64), float(stop_at))
    return int(idx), float(score)


if USE_NUMBA:
    lcs_length = lcs_length_numba
    best_match = best_match_numba
else:
    lcs_length = lcs_length_numpy
    best_match = best_match_numpy


def pack(sequences: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten integer sequences into (pool, offsets) for ``best_match``."""
    offsets = np.zeros(len(sequences) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in sequences])
    pool = np.concatenate(sequences).astype(np.int64) if sequences else np.zeros(0, np.int64)
    return pool, offsets

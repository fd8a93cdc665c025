"""Longest increasing / common subsequence lengths for permutations and planar point sets.

The LCS of two permutations is computed through the identity
LCS(p, t) = LIS(p^-1, t^-1), where the right side is the longest chain of
the point set {(p^-1(k), t^-1(k))} under the strict coordinatewise order.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .perm import Permutation

DP_ORACLE_MAX_N = 4096


@nb.njit(cache=True, nogil=True)
def _lis_length(seq):
    n = seq.shape[0]
    tops = np.empty(n, dtype=seq.dtype)
    size = 0
    for i in range(n):
        v = seq[i]
        lo = 0
        hi = size
        # lower bound: first pile whose top is >= v (strict increase)
        while lo < hi:
            mid = (lo + hi) >> 1
            if tops[mid] < v:
                lo = mid + 1
            else:
                hi = mid
        tops[lo] = v
        if lo == size:
            size += 1
    return size


@nb.njit(cache=True, nogil=True)
def _lis_witness(seq):
    """Indices (into seq) of one longest strictly increasing subsequence."""
    n = seq.shape[0]
    top_idx = np.empty(n, dtype=np.int64)
    prev = np.full(n, -1, dtype=np.int64)
    size = 0
    for i in range(n):
        v = seq[i]
        lo = 0
        hi = size
        while lo < hi:
            mid = (lo + hi) >> 1
            if seq[top_idx[mid]] < v:
                lo = mid + 1
            else:
                hi = mid
        if lo > 0:
            prev[i] = top_idx[lo - 1]
        top_idx[lo] = i
        if lo == size:
            size += 1
    out = np.empty(size, dtype=np.int64)
    k = top_idx[size - 1] if size > 0 else -1
    for r in range(size - 1, -1, -1):
        out[r] = k
        k = prev[k]
    return out


@nb.njit(cache=True, nogil=True)
def _lcs_sequence(a, b):
    """For 0-based permutations a, b: w[i] = b^-1(a[i]); LIS(w) = LCS(a, b)."""
    n = a.shape[0]
    binv = np.empty(n, dtype=np.int64)
    for i in range(n):
        binv[b[i]] = i
    w = np.empty(n, dtype=np.int64)
    for i in range(n):
        w[i] = binv[a[i]]
    return w


@nb.njit(cache=True, nogil=True)
def lcs_zero_based(a, b):
    """LCS length of two 0-based permutation arrays of equal length."""
    return _lis_length(_lcs_sequence(a, b))


@nb.njit(cache=True, nogil=True)
def _lcs_table(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[m]


def lis(p: Permutation, witness: bool = False):
    """Length of the longest increasing subsequence of ``p``.

    With ``witness=True`` returns ``(length, values)`` where ``values`` is one
    longest increasing subsequence in 1-based values.
    """
    if witness:
        idx = _lis_witness(p.array)
        return len(idx), tuple(int(v) + 1 for v in p.array[idx])
    return int(_lis_length(p.array))


def lis_sequence(values) -> int:
    """LIS length of an arbitrary sequence of distinct reals."""
    arr = np.asarray(values)
    if arr.size == 0:
        return 0
    return int(_lis_length(arr))


def lis_points(points) -> int:
    """Longest chain of a planar point set under the strict coordinatewise order.

    Points are sorted by x and the patience LIS of the y sequence is taken;
    x coordinates and y coordinates must each be distinct.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return 0
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size != x.size or np.unique(y).size != y.size:
        raise ValueError("point set has a repeated x or y coordinate")
    return int(_lis_length(y[np.argsort(x)]))


def lcs(p: Permutation, t: Permutation, witness: bool = False):
    """Length of the longest common subsequence of two permutations of [n].

    Runs in O(n log n) via the inverse-pair LIS reduction.  Sorting the points
    (p^-1(k), t^-1(k)) by x is reading k = p(i) for i = 1..n, so the y sequence
    is simply t^-1(p(i)).  With ``witness=True`` returns ``(length, values)``.
    """
    if p.n != t.n:
        raise ValueError(f"size mismatch: {p.n} vs {t.n}")
    w = _lcs_sequence(p.array, t.array)
    if witness:
        idx = _lis_witness(w)
        return len(idx), tuple(int(v) + 1 for v in p.array[idx])
    return int(_lis_length(w))


def lcs_arrays(a: np.ndarray, b: np.ndarray) -> int:
    """LCS of two 1-based one-line arrays (no validation; hot path)."""
    return int(lcs_zero_based(np.asarray(a, dtype=np.int64) - 1, np.asarray(b, dtype=np.int64) - 1))


def lcs_dp_oracle(p: Permutation, t: Permutation) -> int:
    """Textbook quadratic-table LCS; refuses inputs longer than 4096."""
    if p.n != t.n:
        raise ValueError(f"size mismatch: {p.n} vs {t.n}")
    if p.n > DP_ORACLE_MAX_N:
        raise ValueError(f"DP oracle is limited to n <= {DP_ORACLE_MAX_N}")
    return int(_lcs_table(p.array, t.array))


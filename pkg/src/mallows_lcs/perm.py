"""Permutations in one-line notation, inversion counting and the exact Mallows law.

Values are 1-based at every public boundary (constructor, ``values``, text
format); the backing array is 0-based and read-only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np

MAX_ENUMERATION_N = 8


@nb.njit(cache=True, nogil=True)
def _count_inversions(a):
    # Fenwick tree over values, scanning right to left.
    n = a.shape[0]
    tree = np.zeros(n + 1, dtype=np.int64)
    total = 0
    for i in range(n - 1, -1, -1):
        v = a[i]
        # number of smaller values already seen to the right
        j = v
        while j > 0:
            total += tree[j]
            j -= j & -j
        j = v + 1
        while j <= n:
            tree[j] += 1
            j += j & -j
    return total


class Permutation:
    """An immutable bijection of {1, ..., n}."""

    __slots__ = ("_a", "_hash")

    def __init__(self, values: Iterable[int]):
        a = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.int64) - 1
        self._a = _validated(a)
        self._hash = None

    @classmethod
    def from_zero_based(cls, array, check: bool = True) -> "Permutation":
        """Wrap a 0-based array without copying when it is already int64."""
        a = np.ascontiguousarray(array, dtype=np.int64)
        obj = cls.__new__(cls)
        if check:
            a = _validated(a)
        elif a.flags.writeable:
            a = a.copy()
            a.flags.writeable = False
        obj._a = a
        obj._hash = None
        return obj

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls.from_zero_based(np.arange(n, dtype=np.int64), check=False)

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        """Parse the comma-separated text format, e.g. ``"3,4,1,2,5"``."""
        parts = [s.strip() for s in text.strip().split(",")]
        try:
            return cls(int(s) for s in parts)
        except ValueError as exc:
            raise ValueError(f"malformed permutation text {text!r}: {exc}") from None

    @property
    def n(self) -> int:
        return int(self._a.shape[0])

    @property
    def array(self) -> np.ndarray:
        """Read-only 0-based values."""
        return self._a

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(int(v) + 1 for v in self._a)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self.values)

    def __call__(self, i: int) -> int:
        """pi(i) for 1-based i."""
        if not 1 <= i <= self.n:
            raise IndexError(f"position {i} outside [1, {self.n}]")
        return int(self._a[i - 1]) + 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._a, other._a))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self._a.tobytes())
        return self._hash

    def __repr__(self) -> str:
        if self.n > 12:
            head = ",".join(str(v + 1) for v in self._a[:10])
            return f"Permutation({head},... n={self.n})"
        return f"Permutation({self})"

    def __str__(self) -> str:
        return ",".join(str(int(v) + 1) for v in self._a)

    def inversions(self) -> int:
        return inversion_count(self)

    def inverse(self) -> "Permutation":
        return inverse(self)

    def reverse(self) -> "Permutation":
        return reverse(self)


def _validated(a: np.ndarray) -> np.ndarray:
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValueError("a permutation needs at least one value")
    n = a.shape[0]
    if a.min() < 0 or a.max() >= n:
        raise ValueError(f"values must lie in 1..{n}")
    seen = np.zeros(n, dtype=bool)
    seen[a] = True
    if not seen.all():
        raise ValueError("values are not a bijection (repeated entry)")
    a = a.copy()
    a.flags.writeable = False
    return a


def inversion_count(p: Permutation) -> int:
    """Number of pairs i < j with p(i) > p(j), in O(n log n)."""
    return int(_count_inversions(p.array))


def inverse(p: Permutation) -> Permutation:
    inv = np.empty_like(p.array)
    inv[p.array] = np.arange(p.n, dtype=np.int64)
    return Permutation.from_zero_based(inv, check=False)


def reverse(p: Permutation) -> Permutation:
    return Permutation.from_zero_based(p.array[::-1], check=False)


def induced(p: Permutation, indices: Sequence[int]) -> Permutation:
    """Rank-relabelled restriction of ``p`` to the 1-based ``indices``.

    The i-th entry of the result is j when p(indices[i]) is the j-th smallest
    of the restricted values.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.shape[0] == 0:
        raise ValueError("indices must be a non-empty sequence")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly increasing")
    if idx[0] < 1 or idx[-1] > p.n:
        raise ValueError(f"indices must lie in 1..{p.n}")
    sub = p.array[idx - 1]
    ranks = np.empty_like(sub)
    ranks[np.argsort(sub, kind="stable")] = np.arange(sub.shape[0], dtype=np.int64)
    return Permutation.from_zero_based(ranks, check=False)


@dataclass(frozen=True)
class MallowsLaw:
    """The Mallows measure on S_n with weight q**inversions."""

    n: int
    q: float
    normalizer: float

    @classmethod
    def of(cls, n: int, q: float) -> "MallowsLaw":
        if n < 1:
            raise ValueError("n must be positive")
        if not q > 0:
            raise ValueError("q must be positive")
        return cls(n, float(q), mallows_normalizer(n, q))

    def probability(self, p: Permutation) -> float:
        if p.n != self.n:
            raise ValueError("size mismatch")
        return self.q ** inversion_count(p) / self.normalizer

    def mean_inversions(self) -> float:
        """Exact E[inversions], from the independent truncated-geometric codes."""
        total = 0.0
        for i in range(1, self.n + 1):
            w = [self.q**k for k in range(i)]
            total += math.fsum(k * wk for k, wk in enumerate(w)) / math.fsum(w)
        return total


def mallows_normalizer(n: int, q: float) -> float:
    """Z_{n,q} = prod_{i=1..n} (1 + q + ... + q^{i-1})."""
    z = 1.0
    for i in range(1, n + 1):
        z *= math.fsum(q**k for k in range(i))
    return z


def enumerate_pmf(n: int, q: float) -> dict[Permutation, float]:
    """Exact Mallows probabilities over all of S_n, n <= 8."""
    if not 1 <= n <= MAX_ENUMERATION_N:
        raise ValueError(f"enumeration is limited to 1 <= n <= {MAX_ENUMERATION_N}, got {n}")
    if not q > 0:
        raise ValueError("q must be positive")
    perms = [Permutation(v) for v in itertools.permutations(range(1, n + 1))]
    weights = [q ** inversion_count(p) for p in perms]
    z = math.fsum(weights)
    return {p: w / z for p, w in zip(perms, weights)}

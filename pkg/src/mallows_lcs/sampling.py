"""Reproducible random streams and the two insertion constructions of Mallows permutations.

Two constructions are provided:

* the q-Mallows process, which appends element i at a truncated-geometric
  rank p_i(i) in [1, i] and yields a Mallows(1/q) permutation;
* the Mallows(q) insertion process, which places i at the Z_i-th smallest
  unused natural number (Z_i ~ Geom(1-q)) and whose rank-relabelled prefix of
  length n is Mallows(q).

Every sampler takes either an :class:`RngStream` (a reproducible stream
identity; each call starts the stream from its beginning) or a live
``numpy.random.Generator`` (draws continue where the generator left off).
Batch samplers return 2-D arrays of 1-based one-line notation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numba as nb
import numpy as np

from .perm import Permutation


@dataclass(frozen=True)
class RngStream:
    """Identity of a counter-based random stream.

    Substreams are Philox generators keyed by ``SeedSequence(master_seed,
    spawn_key=(stream_index,))``, so the draw sequence depends only on the
    pair and never on which thread or process consumes it.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, index: int) -> "RngStream":
        """A stream for replica ``index`` of an experiment run under this stream's seed."""
        return RngStream(self.master_seed, index)


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


class TraceKind(enum.Enum):
    TRUNCATED = "truncated"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class InsertionTrace:
    """The draws that built a permutation: p_i(i) (TRUNCATED) or Z_i (GEOMETRIC)."""

    draws: np.ndarray
    kind: TraceKind

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=np.int64)
        if d.ndim != 1:
            raise ValueError("draws must be one-dimensional")
        if d.size and d.min() < 1:
            raise ValueError("draws must be positive")
        if self.kind is TraceKind.TRUNCATED and np.any(d > np.arange(1, d.size + 1)):
            raise ValueError("truncated draw i must lie in [1, i]")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "draws", d)


# -- geometric draws ---------------------------------------------------------

def _open_uniform(gen: np.random.Generator, size) -> np.ndarray:
    # 1 - U with U in [0, 1) lies in (0, 1]; the log is always finite.
    return 1.0 - gen.random(size)


def geom(q: float, rng: RngLike, size=None):
    """Geom(1-q) on {1, 2, ...}: P(k) = (1-q) q^(k-1), by inverse CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"geometric parameter q must lie in (0, 1), got {q}")
    gen = as_generator(rng)
    u = _open_uniform(gen, size)
    z = 1 + np.floor(np.log(u) / math.log(q)).astype(np.int64)
    return int(z) if size is None else z


def truncated_geom(q: float, i: int, rng: RngLike, size=None):
    """Draw j in [1, i] with probability proportional to q^(j-1)."""
    if i < 1:
        raise ValueError(f"truncation point must be >= 1, got {i}")
    if not q > 0:
        raise ValueError("q must be positive")
    gen = as_generator(rng)
    u = _open_uniform(gen, size)
    j = _truncated_from_uniform(q, np.full(np.shape(u), i, dtype=np.int64), u)
    return int(j) if size is None else j


def _truncated_from_uniform(q: float, i: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the truncated geometric; ``i`` and ``u`` broadcast."""
    if q == 1.0:
        j = np.ceil(u * i)
    elif q < 1.0:
        # F(j) = (1 - q^j) / (1 - q^i); smallest j with F(j) >= u
        lq = math.log(q)
        j = np.ceil(np.log1p(-u * -np.expm1(i * lq)) / lq)
    else:
        # mirror: k = i + 1 - j has weight (1/q)^(k-1)
        lr = -math.log(q)
        k = np.ceil(np.log1p(-u * -np.expm1(i * lr)) / lr)
        j = i + 1 - k
    return np.clip(j, 1, i).astype(np.int64)


# -- Fenwick order statistics --------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _fenwick_all_ones(size):
    tree = np.empty(size + 1, dtype=np.int64)
    tree[0] = 0
    for i in range(1, size + 1):
        tree[i] = i & -i
    return tree


@nb.njit(cache=True, nogil=True)
def _fenwick_take_kth(tree, size, log_top, k):
    """Remove and return (1-based) the k-th smallest element still present."""
    pos = 0
    step = log_top
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] < k:
            pos = nxt
            k -= tree[nxt]
        step >>= 1
    pos += 1
    j = pos
    while j <= size:
        tree[j] -= 1
        j += j & -j
    return pos


@nb.njit(cache=True, nogil=True)
def _highest_power_of_two(size):
    p = 1
    while p * 2 <= size:
        p *= 2
    return p


@nb.njit(cache=True, nogil=True)
def _insertion_values(z):
    """Prefix of the infinite insertion process: value i is the z[i]-th smallest unused natural."""
    n = z.shape[0]
    zmax = 0
    for i in range(n):
        if z[i] > zmax:
            zmax = z[i]
    # value i never exceeds (i - 1) + z[i], so n + zmax covers the prefix
    size = n + zmax
    tree = _fenwick_all_ones(size)
    top = _highest_power_of_two(size)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _fenwick_take_kth(tree, size, top, z[i])
    return out


@nb.njit(cache=True, nogil=True)
def _rank_relabel(values):
    # 0-based ranks of distinct values
    order = np.argsort(values)
    ranks = np.empty(values.shape[0], dtype=np.int64)
    for r in range(order.shape[0]):
        ranks[order[r]] = r
    return ranks


@nb.njit(cache=True, nogil=True)
def _qmallows_from_draws(d):
    """Final p_n (0-based) of the q-Mallows process given draws d[i] = p_{i+1}(i+1).

    Among elements 1..i the i-th one keeps rank p_i(i), so scanning backwards
    it takes the p_i(i)-th smallest value not claimed by later elements.
    """
    n = d.shape[0]
    tree = _fenwick_all_ones(n)
    top = _highest_power_of_two(n)
    out = np.empty(n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        out[i] = _fenwick_take_kth(tree, n, top, d[i]) - 1
    return out


@nb.njit(cache=True, nogil=True)
def _qmallows_batch(draws):
    out = np.empty_like(draws)
    for r in range(draws.shape[0]):
        out[r] = _qmallows_from_draws(draws[r])
    return out


@nb.njit(cache=True, nogil=True)
def _insertion_batch(z):
    out = np.empty_like(z)
    for r in range(z.shape[0]):
        out[r] = _rank_relabel(_insertion_values(z[r]))
    return out


# -- q-Mallows process -----------------------------------------------------------

def qmallows_from_trace(draws) -> Permutation:
    """Rebuild p_n from the truncated draws p_1(1), ..., p_n(n)."""
    trace = InsertionTrace(np.asarray(draws, dtype=np.int64), TraceKind.TRUNCATED)
    return Permutation.from_zero_based(_qmallows_from_draws(trace.draws), check=False)


def _truncated_draws(n: int, q: float, gen: np.random.Generator, count=None) -> np.ndarray:
    shape = (n,) if count is None else (count, n)
    u = _open_uniform(gen, shape)
    return _truncated_from_uniform(q, np.arange(1, n + 1, dtype=np.int64), u)


def qmallows_process(n: int, q: float, rng: RngLike) -> tuple[Permutation, InsertionTrace]:
    """Run the q-Mallows process to size n; the result is Mallows(1/q)."""
    _check_size(n)
    if not q > 0:
        raise ValueError("q must be positive")
    draws = _truncated_draws(n, q, as_generator(rng))
    trace = InsertionTrace(draws, TraceKind.TRUNCATED)
    return Permutation.from_zero_based(_qmallows_from_draws(trace.draws), check=False), trace


def qmallows_batch(n: int, q: float, count: int, rng: RngLike) -> tuple[np.ndarray, np.ndarray]:
    """``count`` independent q-Mallows runs: (permutations, draws), both (count, n), 1-based."""
    _check_size(n)
    if not q > 0:
        raise ValueError("q must be positive")
    draws = _truncated_draws(n, q, as_generator(rng), count)
    return _qmallows_batch(draws) + 1, draws


# -- Mallows(q) insertion process ------------------------------------------------

def insertion_from_draws(z) -> tuple[np.ndarray, Permutation]:
    """Infinite-permutation prefix values (1-based naturals) and the induced permutation."""
    trace = InsertionTrace(np.asarray(z, dtype=np.int64), TraceKind.GEOMETRIC)
    if trace.draws.size == 0:
        raise ValueError("need at least one draw")
    values = _insertion_values(trace.draws)
    return values, Permutation.from_zero_based(_rank_relabel(values), check=False)


def insertion_process_prefix(n: int, q: float, rng: RngLike) -> tuple[Permutation, InsertionTrace]:
    """Induced permutation of the first n steps of the Mallows(q) insertion process."""
    _check_size(n)
    z = geom(q, rng, size=n)
    _, perm = insertion_from_draws(z)
    return perm, InsertionTrace(z, TraceKind.GEOMETRIC)


def insertion_batch(n: int, q: float, count: int, rng: RngLike) -> np.ndarray:
    _check_size(n)
    z = geom(q, rng, size=(count, n))
    return _insertion_batch(z) + 1


# -- finite Mallows sampler ---------------------------------------------------------

def sample_mallows(n: int, q: float, rng: RngLike) -> Permutation:
    """Exact Mallows(q) sample on S_n for any q > 0."""
    _check_size(n)
    if not q > 0:
        raise ValueError("q must be positive")
    if q == 1.0:
        return Permutation.from_zero_based(as_generator(rng).permutation(n), check=False)
    if q < 1.0:
        return insertion_process_prefix(n, q, rng)[0]
    # the reversal of a Mallows(1/q) permutation is Mallows(q)
    return insertion_process_prefix(n, 1.0 / q, rng)[0].reverse()


def sample_mallows_batch(n: int, q: float, count: int, rng: RngLike) -> np.ndarray:
    """``count`` independent Mallows(q) samples as a (count, n) array, 1-based."""
    _check_size(n)
    if not q > 0:
        raise ValueError("q must be positive")
    gen = as_generator(rng)
    if q == 1.0:
        base = np.tile(np.arange(1, n + 1, dtype=np.int64), (count, 1))
        return gen.permuted(base, axis=1)
    if q < 1.0:
        return insertion_batch(n, q, count, gen)
    return insertion_batch(n, 1.0 / q, count, gen)[:, ::-1].copy()


def _check_size(n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def inversions_from_trace(trace: InsertionTrace) -> int:
    """l(p_n) = n(n+1)/2 - sum_i p_i(i) for a q-Mallows trace."""
    if trace.kind is not TraceKind.TRUNCATED:
        raise ValueError("only truncated traces determine the inversion count")
    n = trace.draws.size
    return n * (n + 1) // 2 - int(trace.draws.sum())


__all__ = [
    "InsertionTrace",
    "RngStream",
    "TraceKind",
    "as_generator",
    "geom",
    "insertion_batch",
    "insertion_from_draws",
    "insertion_process_prefix",
    "inversions_from_trace",
    "qmallows_batch",
    "qmallows_from_trace",
    "qmallows_process",
    "sample_mallows",
    "sample_mallows_batch",
    "truncated_geom",
]

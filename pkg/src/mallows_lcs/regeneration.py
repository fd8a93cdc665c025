"""Regenerative structure of two coupled Mallows insertion processes.

Two independent insertion processes driven by Z_i ~ Geom(1-q) and
Z'_i ~ Geom(1-q') renew at every index T where both prefixes map [T] onto
[T].  The product chain

    M_n = max(M_{n-1}, Z_n) - 1,   M'_n = max(M'_{n-1}, Z'_n) - 1

started at (0, 0) tracks max_{j<=n} value(j) - n for each process, so its
visits to (0, 0) are exactly the renewal times.  Between renewals the two
processes restricted and shifted to the block give permutations
(Sigma_j, Sigma'_j); their LCS is Y_j and the block length is X_j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from .limits import euler_z
from .perm import Permutation
from .sampling import RngLike, _insertion_values, _rank_relabel, as_generator, insertion_from_draws
from .subsequence import lcs, lcs_zero_based

DEFAULT_CAP = 10**8
_CHUNK = 1 << 16


class CapExceededError(RuntimeError):
    """A simulated excursion ran past its step cap."""

    def __init__(self, message: str, steps: int):
        super().__init__(message)
        self.steps = steps


@dataclass(frozen=True)
class ProductChainState:
    m: int
    m_prime: int

    def __post_init__(self):
        if self.m < 0 or self.m_prime < 0:
            raise ValueError("chain coordinates are nonnegative")


def product_chain_step(s: ProductChainState, z: int, z_prime: int) -> ProductChainState:
    if z < 1 or z_prime < 1:
        raise ValueError("geometric draws are >= 1")
    return ProductChainState(max(s.m, z) - 1, max(s.m_prime, z_prime) - 1)


def _check_q(q: float, name: str = "q") -> float:
    if not 0.0 < q < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {q}")
    return float(q)


class _GeomPairSource:
    """Chunked supply of (Z, Z') pairs from one generator."""

    def __init__(self, q: float, q_prime: float, rng: RngLike, chunk: int = _CHUNK):
        self.gen = as_generator(rng)
        self.lq = math.log(_check_q(q))
        self.lqp = math.log(_check_q(q_prime, "q_prime"))
        self.chunk = chunk

    def next_chunk(self, size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        size = size or self.chunk
        u = 1.0 - self.gen.random((2, size))
        z = 1 + np.floor(np.log(u[0]) / self.lq).astype(np.int64)
        zp = 1 + np.floor(np.log(u[1]) / self.lqp).astype(np.int64)
        return z, zp


# -- chain kernels -----------------------------------------------------------------

@nb.njit(cache=True, nogil=True)
def _chain_zero_hits(z, zp, m, mp, hits):
    """Advance the chain over one chunk; hits[k] = 1-based step index of the k-th visit to (0,0)."""
    count = 0
    for i in range(z.shape[0]):
        if z[i] > m:
            m = z[i]
        if zp[i] > mp:
            mp = zp[i]
        m -= 1
        mp -= 1
        if m == 0 and mp == 0:
            hits[count] = i + 1
            count += 1
    return count, m, mp


@nb.njit(cache=True, nogil=True)
def _hitting_batch(start_m, start_mp, z, zp, pos, run, cur_m, cur_mp, steps, strict, cap, out):
    """Hitting times of (0,0) for runs run..end, consuming draws from ``pos``.

    Returns (run, pos, cur_m, cur_mp, steps, status) with status 0 = all runs
    finished, 1 = draws exhausted mid-run, 2 = cap exceeded.
    """
    nruns = start_m.shape[0]
    nz = z.shape[0]
    while run < nruns:
        if steps == 0 and not strict and cur_m == 0 and cur_mp == 0:
            out[run] = 0
            run += 1
            if run < nruns:
                cur_m = start_m[run]
                cur_mp = start_mp[run]
            continue
        while True:
            if pos >= nz:
                return run, pos, cur_m, cur_mp, steps, 1
            if z[pos] > cur_m:
                cur_m = z[pos]
            if zp[pos] > cur_mp:
                cur_mp = zp[pos]
            cur_m -= 1
            cur_mp -= 1
            pos += 1
            steps += 1
            if cur_m == 0 and cur_mp == 0:
                break
            if steps >= cap:
                return run, pos, cur_m, cur_mp, steps, 2
        out[run] = steps
        steps = 0
        run += 1
        if run < nruns:
            cur_m = start_m[run]
            cur_mp = start_mp[run]
    return run, pos, cur_m, cur_mp, steps, 0


@nb.njit(cache=True, nogil=True)
def _occupation(z, zp, m, mp, counts):
    kmax = counts.shape[0] - 1
    for i in range(z.shape[0]):
        if z[i] > m:
            m = z[i]
        if zp[i] > mp:
            mp = zp[i]
        m -= 1
        mp -= 1
        if m <= kmax and mp <= kmax:
            counts[m, mp] += 1
    return m, mp


@nb.njit(cache=True, nogil=True)
def _block_xy(z, zp, cuts):
    """Block lengths and LCS values for blocks z[cuts[k]:cuts[k+1]]."""
    nb_ = cuts.shape[0] - 1
    x = np.empty(nb_, dtype=np.int64)
    y = np.empty(nb_, dtype=np.int64)
    for k in range(nb_):
        a = cuts[k]
        b = cuts[k + 1]
        x[k] = b - a
        if b - a == 1:
            y[k] = 1
            continue
        s = _rank_relabel(_insertion_values(z[a:b]))
        sp = _rank_relabel(_insertion_values(zp[a:b]))
        y[k] = lcs_zero_based(s, sp)
    return x, y


# -- return times ----------------------------------------------------------------------

def hitting_times(
    starts: Sequence[tuple[int, int]] | np.ndarray,
    q: float,
    q_prime: float,
    rng: RngLike,
    strict: bool = False,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """Steps for the product chain to reach (0, 0) from each start state.

    ``strict=False`` gives R_0 (zero for a start at (0, 0)); ``strict=True``
    gives the first return time R_0^+ (at least one step).
    """
    st = np.asarray(starts, dtype=np.int64).reshape(-1, 2)
    if st.size and st.min() < 0:
        raise ValueError("start states are nonnegative")
    out = np.empty(st.shape[0], dtype=np.int64)
    if st.shape[0] == 0:
        return out
    src = _GeomPairSource(q, q_prime, rng)
    run, steps = 0, 0
    cur_m, cur_mp = int(st[0, 0]), int(st[0, 1])
    while True:
        z, zp = src.next_chunk()
        run, _, cur_m, cur_mp, steps, status = _hitting_batch(
            st[:, 0], st[:, 1], z, zp, 0, run, cur_m, cur_mp, steps, strict, cap, out
        )
        if status == 0:
            return out
        if status == 2:
            raise CapExceededError(f"return time exceeded cap={cap} (run {run})", int(steps))


def return_times(q: float, q_prime: float, count: int, rng: RngLike, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``count`` i.i.d. first-return times R_0^+ of the product chain to (0, 0)."""
    if count < 1:
        raise ValueError("count must be positive")
    return hitting_times(np.zeros((count, 2), dtype=np.int64), q, q_prime, rng, strict=True, cap=cap)


def simulate_return_time(q: float, q_prime: float, rng: RngLike, cap: int = DEFAULT_CAP) -> int:
    """One first-return time R_0^+ of the product chain started at (0, 0)."""
    return int(return_times(q, q_prime, 1, rng, cap)[0])


def renewal_count(n: int, q: float, q_prime: float, rng: RngLike, cap: int = DEFAULT_CAP) -> int:
    """S_n = min{j : T_j >= n}, from the product chain alone."""
    if n < 1:
        raise ValueError("n must be positive")
    src = _GeomPairSource(q, q_prime, rng)
    m = mp = 0
    done = 0
    renewals = 0
    since_last = 0
    while True:
        z, zp = src.next_chunk()
        hits = np.empty(z.shape[0], dtype=np.int64)
        count, m, mp = _chain_zero_hits(z, zp, m, mp, hits)
        if count:
            late = np.nonzero(done + hits[:count] >= n)[0]
            if late.size:
                return renewals + int(late[0]) + 1
            renewals += count
            since_last = z.shape[0] - int(hits[count - 1])
        else:
            since_last += z.shape[0]
        if since_last >= cap:
            raise CapExceededError(f"no renewal within cap={cap} steps", since_last)
        done += z.shape[0]


# -- stationary law ------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryLaw:
    """Product-form stationary law of the chain (M, M')."""

    q: float
    q_prime: float
    z_q: float
    z_qprime: float

    @classmethod
    def of(cls, q: float, q_prime: float | None = None) -> "StationaryLaw":
        q_prime = q if q_prime is None else q_prime
        return cls(_check_q(q), _check_q(q_prime, "q_prime"), euler_z(q), euler_z(q_prime))

    @property
    def nu00(self) -> float:
        return 1.0 / (self.z_q * self.z_qprime)

    def marginal(self, i: int, prime: bool = False) -> float:
        """mu_i = q^i / (Z(q) prod_{k<=i} (1 - q^k))."""
        q, z = (self.q_prime, self.z_qprime) if prime else (self.q, self.z_q)
        if i < 0:
            return 0.0
        log_denominator = math.fsum(math.log1p(-(q**k)) for k in range(1, i + 1))
        return math.exp(i * math.log(q) - log_denominator) / z

    def marginal_table(self, prime: bool = False, tail: float = 1e-17) -> np.ndarray:
        """mu_0, mu_1, ... truncated once the remaining mass is below ``tail``."""
        q, z = (self.q_prime, self.z_qprime) if prime else (self.q, self.z_q)
        vals = [1.0 / z]
        total = vals[0]
        k = 0
        while 1.0 - total > tail and k < 100_000:
            k += 1
            nxt = vals[-1] * q / (1.0 - q**k)
            vals.append(nxt)
            total += nxt
            if nxt < tail * 1e-3:
                break
        return np.array(vals)

    def pmf(self, i: int, j: int) -> float:
        return self.marginal(i) * self.marginal(j, prime=True)

    def sample_states(self, count: int, rng: RngLike) -> np.ndarray:
        """``count`` independent draws from the stationary law, shape (count, 2)."""
        gen = as_generator(rng)
        cols = []
        for prime in (False, True):
            cdf = np.cumsum(self.marginal_table(prime))
            cdf /= cdf[-1]
            cols.append(np.searchsorted(cdf, gen.random(count), side="right"))
        return np.column_stack(cols).astype(np.int64)


def stationary_pmf(law: StationaryLaw, i: int, j: int) -> float:
    return law.pmf(i, j)


def occupation_frequencies(
    q: float, q_prime: float, steps: int, rng: RngLike, max_coord: int = 10
) -> np.ndarray:
    """Fraction of ``steps`` chain steps (from (0,0)) spent in each (i, j), i, j <= max_coord."""
    src = _GeomPairSource(q, q_prime, rng)
    counts = np.zeros((max_coord + 1, max_coord + 1), dtype=np.int64)
    m = mp = 0
    left = steps
    while left > 0:
        z, zp = src.next_chunk(min(_CHUNK * 16, left))
        m, mp = _occupation(z, zp, m, mp, counts)
        left -= z.shape[0]
    return counts / steps


# -- renewal blocks ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RenewalBlock:
    length: int
    sigma: Permutation
    sigma_prime: Permutation
    y: int

    def __post_init__(self):
        if not 1 <= self.y <= self.length:
            raise ValueError("block LCS must lie in [1, length]")
        if self.sigma.n != self.length or self.sigma_prime.n != self.length:
            raise ValueError("block permutations must have the block length")


class _RenewalCutter:
    """Streams the coupled draws and cuts them at chain visits to (0, 0)."""

    def __init__(self, q: float, q_prime: float, rng: RngLike, cap: int):
        self.src = _GeomPairSource(q, q_prime, rng)
        self.cap = cap
        self.z_left = np.empty(0, dtype=np.int64)
        self.zp_left = np.empty(0, dtype=np.int64)
        self.m = 0
        self.mp = 0

    def next_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(z, z', cuts) holding at least one complete block; cuts start at 0."""
        while True:
            z_new, zp_new = self.src.next_chunk()
            hits = np.empty(z_new.shape[0], dtype=np.int64)
            count, self.m, self.mp = _chain_zero_hits(z_new, zp_new, self.m, self.mp, hits)
            z = np.concatenate((self.z_left, z_new))
            zp = np.concatenate((self.zp_left, zp_new))
            if count == 0:
                if z.shape[0] >= self.cap:
                    raise CapExceededError(f"block longer than cap={self.cap}", int(z.shape[0]))
                self.z_left, self.zp_left = z, zp
                continue
            offset = self.z_left.shape[0]
            cuts = np.concatenate(([0], hits[:count] + offset))
            if np.max(np.diff(cuts)) > self.cap:
                raise CapExceededError(f"block longer than cap={self.cap}", int(np.max(np.diff(cuts))))
            end = cuts[-1]
            self.z_left, self.zp_left = z[end:], zp[end:]
            return z[:end], zp[:end], cuts


def renewal_xy(
    q: float, q_prime: float, count: int, rng: RngLike, cap: int = DEFAULT_CAP
) -> tuple[np.ndarray, np.ndarray]:
    """Block lengths X_j and block LCS values Y_j for the first ``count`` blocks.

    Blocks are reduced to (X_j, Y_j) as they are produced; the block
    permutations are not kept.
    """
    if count < 1:
        raise ValueError("count must be positive")
    cutter = _RenewalCutter(q, q_prime, rng, cap)
    xs, ys = [], []
    have = 0
    while have < count:
        z, zp, cuts = cutter.next_blocks()
        keep = min(count - have, cuts.shape[0] - 1)
        x, y = _block_xy(z, zp, cuts[: keep + 1])
        xs.append(x)
        ys.append(y)
        have += keep
    return np.concatenate(xs), np.concatenate(ys)


def renewal_blocks(
    q: float, q_prime: float, count: int, rng: RngLike, cap: int = DEFAULT_CAP
) -> list[RenewalBlock]:
    """The first ``count`` renewal blocks with their permutations retained."""
    if count < 1:
        raise ValueError("count must be positive")
    cutter = _RenewalCutter(q, q_prime, rng, cap)
    blocks: list[RenewalBlock] = []
    while len(blocks) < count:
        z, zp, cuts = cutter.next_blocks()
        for a, b in zip(cuts[:-1], cuts[1:]):
            if len(blocks) == count:
                break
            _, sigma = insertion_from_draws(z[a:b])
            _, sigma_p = insertion_from_draws(zp[a:b])
            blocks.append(RenewalBlock(int(b - a), sigma, sigma_p, lcs(sigma, sigma_p)))
    return blocks


# -- coupled finite runs ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoupledRun:
    """Coupled draws covering [1, T_{S_n}], the renewal times and block LCS values.

    ``pi`` and ``tau`` are the permutations of [n] induced by the first n steps
    of the two insertion processes.
    """

    n: int
    z: np.ndarray
    z_prime: np.ndarray
    renewal_times: np.ndarray
    y: np.ndarray

    @property
    def s_n(self) -> int:
        return int(self.renewal_times.shape[0])

    @property
    def pi(self) -> Permutation:
        return insertion_from_draws(self.z[: self.n])[1]

    @property
    def tau(self) -> Permutation:
        return insertion_from_draws(self.z_prime[: self.n])[1]


def coupled_run(n: int, q: float, q_prime: float, rng: RngLike, cap: int = DEFAULT_CAP) -> CoupledRun:
    """Drive both insertion processes until the first renewal at or after n."""
    if n < 1:
        raise ValueError("n must be positive")
    cutter = _RenewalCutter(q, q_prime, rng, cap)
    zs, zps, times = [], [], []
    total = 0
    while True:
        z, zp, cuts = cutter.next_blocks()
        ends = total + cuts[1:]
        first = int(np.searchsorted(ends, n))
        if first < ends.shape[0]:
            take = int(cuts[first + 1])
            zs.append(z[:take])
            zps.append(zp[:take])
            times.extend(ends[: first + 1])
            break
        zs.append(z)
        zps.append(zp)
        times.extend(ends)
        total += int(cuts[-1])
    z_all = np.concatenate(zs)
    zp_all = np.concatenate(zps)
    t = np.array(times, dtype=np.int64)
    cuts = np.concatenate(([0], t))
    _, y = _block_xy(z_all, zp_all, cuts)
    return CoupledRun(n, z_all, zp_all, t, y)


def sandwich_bounds(run: CoupledRun) -> tuple[int, int]:
    """(sum_{j < S_n} Y_j, sum_{j <= S_n} Y_j) for a coupled run."""
    lower = int(run.y[:-1].sum())
    return lower, lower + int(run.y[-1])


def prefix_complete_times(values: np.ndarray) -> np.ndarray:
    """1-based indices j at which the first j values are exactly {1, ..., j}.

    Detected by counting, with a Fenwick tree, how many of the first j values
    are at most j.
    """
    v = np.asarray(values, dtype=np.int64)
    return _prefix_complete(v)


@nb.njit(cache=True, nogil=True)
def _prefix_complete(v):
    n = v.shape[0]
    size = 0
    for i in range(n):
        if v[i] > size:
            size = v[i]
    tree = np.zeros(size + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    count = 0
    for i in range(n):
        j = v[i]
        while j <= size:
            tree[j] += 1
            j += j & -j
        # number of the first i+1 values that are <= i+1
        s = 0
        j = min(i + 1, size)
        while j > 0:
            s += tree[j]
            j -= j & -j
        if s == i + 1:
            out[count] = i + 1
            count += 1
    return out[:count]


# -- CLT parameters -------------------------------------------------------------------------

@dataclass(frozen=True)
class CltEstimate:
    a_hat: float
    delta2_hat: float
    sigma_hat: float
    nu00: float
    n_blocks: int
    se_a: float
    se_sigma: float

    def as_dict(self) -> dict:
        return {
            "a_hat": self.a_hat,
            "delta2_hat": self.delta2_hat,
            "sigma_hat": self.sigma_hat,
            "nu00": self.nu00,
            "n_blocks": self.n_blocks,
            "se_a": self.se_a,
            "se_sigma": self.se_sigma,
        }


def estimate_clt_params(blocks, law: StationaryLaw) -> CltEstimate:
    """Plug-in estimates of a = nu00 E[Y], delta^2 = Var(Y - a X), sigma = delta sqrt(nu00).

    ``blocks`` is a sequence of :class:`RenewalBlock` or an ``(x, y)`` pair of arrays.
    """
    x, y = _as_xy(blocks)
    k = x.shape[0]
    if k < 2:
        raise ValueError("need at least two blocks")
    nu = law.nu00
    a = nu * math.fsum(y) / k
    # shifting by the first increment keeps the variance exact for constant data
    d = (y - a * x) - (y[0] - a * x[0])
    dbar = math.fsum(d) / k
    delta2 = math.fsum((d - dbar) ** 2) / (k - 1)
    sigma = math.sqrt(delta2 * nu)
    se_a = nu * float(np.std(y, ddof=1)) / math.sqrt(k)
    # delta method for sqrt(nu * s^2): sd(s^2) ~ sqrt((m4 - s^4) / k)
    m4 = math.fsum((d - dbar) ** 4) / k
    se_delta2 = math.sqrt(max(m4 - delta2**2, 0.0) / k)
    se_sigma = 0.0 if sigma == 0 else nu * se_delta2 / (2.0 * sigma)
    return CltEstimate(a, delta2, sigma, nu, k, se_a, se_sigma)


def _as_xy(blocks) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(blocks, tuple) and len(blocks) == 2 and isinstance(blocks[0], np.ndarray):
        x, y = blocks
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    items: Iterable[RenewalBlock] = blocks
    pairs = [(b.length, b.y) for b in items]
    arr = np.array(pairs, dtype=np.float64).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]

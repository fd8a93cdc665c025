"""Monte Carlo experiments for the LCS limit laws, with reproducible parallel replicas.

Replica r of an experiment always draws from ``RngStream(seed, r)``; the
worker pool only decides which thread runs which replica, so results do not
depend on ``workers``.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import special, stats

from . import __version__
from .limits import WEAK_LAW_CONSTANT, finite_beta_limit
from .regeneration import (
    DEFAULT_CAP,
    StationaryLaw,
    coupled_run,
    estimate_clt_params,
    occupation_frequencies,
    renewal_xy,
    sandwich_bounds,
)
from .sampling import RngStream, sample_mallows
from .subsequence import lcs

# stream index reserved for the block-level parameter estimate of a CLT run
ESTIMATION_STREAM = 2**62
# Estimating a from k blocks shifts the standardized CLT sample by about
# sqrt(n nu00 / k) standard deviations; the default k keeps that below this.
CLT_CENTERING_SD = 0.01
MIN_BLOCKS = 1_000_000


class ExperimentKind(str, enum.Enum):
    WEAK_LAW = "weak_law"
    FINITE_BETA = "finite_beta"
    CLT = "clt"
    RENEWAL = "renewal"
    STATIONARY = "stationary"


@dataclass
class ExperimentConfig:
    kind: ExperimentKind
    n: int = 1000
    q: float | None = None
    q_prime: float | None = None
    beta: float | None = None
    replicas: int = 20
    seed: int | None = None
    workers: int = 1
    output_path: str | None = None
    blocks: int | None = None
    steps: int = 10_000_000
    max_sum: int = 10
    cap: int = DEFAULT_CAP

    # execution settings; they must not influence any numeric output
    _EXECUTION_FIELDS = ("workers", "output_path")

    def __post_init__(self):
        self.kind = ExperimentKind(self.kind)

    @property
    def effective_q(self) -> float:
        if self.kind is ExperimentKind.FINITE_BETA:
            return 1.0 - self.beta / self.n
        if self.q is None and self.kind is ExperimentKind.WEAK_LAW:
            return 1.0 - min(100.0, self.n / 2) / self.n
        return self.q

    @property
    def effective_q_prime(self) -> float:
        return self.effective_q if self.q_prime is None else self.q_prime

    @property
    def effective_blocks(self) -> int:
        if self.blocks is not None:
            return self.blocks
        if self.kind is ExperimentKind.CLT:
            nu00 = StationaryLaw.of(self.effective_q, self.effective_q_prime).nu00
            return max(MIN_BLOCKS, math.ceil(self.n * nu00 / CLT_CENTERING_SD**2))
        return MIN_BLOCKS

    def validate(self) -> "ExperimentConfig":
        if self.seed is None:
            raise ValueError("an explicit seed is required")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        kind = self.kind
        if kind is ExperimentKind.FINITE_BETA:
            if self.beta is None or not self.beta > 0:
                raise ValueError("finite-beta experiments need beta > 0")
            if self.beta >= self.n:
                raise ValueError(f"beta={self.beta} must be smaller than n={self.n}")
        elif kind is ExperimentKind.WEAK_LAW:
            if not 0.0 < self.effective_q < 1.0:
                raise ValueError("weak-law experiments need 0 < q < 1")
        else:
            for name, value in (("q", self.effective_q), ("q_prime", self.effective_q_prime)):
                if value is None or not 0.0 < value < 1.0:
                    raise ValueError(f"{kind.value} experiments need 0 < {name} < 1")
        if kind in (ExperimentKind.CLT, ExperimentKind.RENEWAL) and self.effective_blocks < 2:
            raise ValueError("need at least two blocks")
        return self

    def to_dict(self, include_execution: bool = False) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        if not include_execution:
            for name in self._EXECUTION_FIELDS:
                d.pop(name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__ if not f.startswith("_")}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    std_error: float
    skewness: float
    excess_kurtosis: float
    ks_statistic_vs_normal: float | None

    @classmethod
    def of(cls, values) -> "SummaryStats":
        """Moments of ``values``; the KS distance is to N(0,1) of the values as given."""
        x = np.asarray(values, dtype=np.float64)
        k = x.shape[0]
        if k == 0:
            nan = float("nan")
            return cls(0, nan, nan, nan, nan, nan, None)
        mean = math.fsum(x) / k
        if k < 2:
            return cls(k, mean, 0.0, float("nan"), float("nan"), float("nan"), None)
        var = math.fsum((x - mean) ** 2) / (k - 1)
        if var > 0:
            skew = float(stats.skew(x))
            kurt = float(stats.kurtosis(x))
        else:
            skew = kurt = 0.0
        ks = ks_statistic(x) if k >= 10 else None
        return cls(k, mean, var, math.sqrt(var / k), skew, kurt, ks)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    values: np.ndarray
    stats: SummaryStats
    extras: dict[str, Any] = field(default_factory=dict)
    value_label: str = "value"

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "stats": asdict(self.stats),
            "extras": self.extras,
            "versions": versions(),
        }


def versions() -> dict:
    import numba

    return {"mallows_lcs": __version__, "numpy": np.__version__, "numba": numba.__version__}


def normal_cdf(x):
    return special.ndtr(x)


def ks_statistic(sample, cdf: Callable = normal_cdf) -> float:
    """Sup distance between the empirical CDF of ``sample`` and ``cdf`` (standard normal by default)."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    k = x.shape[0]
    if k < 10:
        raise ValueError("KS statistic needs at least 10 observations")
    f = cdf(x)
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - f), np.max(f - (i - 1) / k)))


def map_replicas(fn: Callable[[int], Any], replicas: int, workers: int) -> list:
    """[fn(0), ..., fn(replicas-1)] in replica order, computed on ``workers`` threads."""
    if workers <= 1:
        return [fn(r) for r in range(replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replicas)))


def _lcs_pair(n: int, q: float, q_prime: float, stream: RngStream) -> int:
    gen = stream.generator()
    return lcs(sample_mallows(n, q, gen), sample_mallows(n, q_prime, gen))


def run_weak_law(cfg: ExperimentConfig) -> ExperimentResult:
    """LCS / (n sqrt(1-q)) for Mallows(q) pairs; target sqrt(6)/3."""
    if cfg.kind is not ExperimentKind.WEAK_LAW:
        raise ValueError("config kind must be weak_law")
    cfg.validate()
    n, q = cfg.n, cfg.effective_q
    scale = n * math.sqrt(1.0 - q)
    raw = map_replicas(lambda r: _lcs_pair(n, q, q, RngStream(cfg.seed, r)), cfg.replicas, cfg.workers)
    values = np.asarray(raw, dtype=np.float64) / scale
    st = SummaryStats.of(values)
    extras = {
        "q": q,
        "n_one_minus_q": n * (1.0 - q),
        "target": WEAK_LAW_CONSTANT,
        "abs_deviation": abs(st.mean - WEAK_LAW_CONSTANT),
        "rel_deviation": abs(st.mean - WEAK_LAW_CONSTANT) / WEAK_LAW_CONSTANT,
    }
    return ExperimentResult(cfg, values, st, extras, "lcs_over_n_sqrt_1mq")


def run_finite_beta(cfg: ExperimentConfig) -> ExperimentResult:
    """LCS / sqrt(n) at q = 1 - beta/n; target 2 J(beta)."""
    if cfg.kind is not ExperimentKind.FINITE_BETA:
        raise ValueError("config kind must be finite_beta")
    cfg.validate()
    n, q = cfg.n, cfg.effective_q
    raw = map_replicas(lambda r: _lcs_pair(n, q, q, RngStream(cfg.seed, r)), cfg.replicas, cfg.workers)
    values = np.asarray(raw, dtype=np.float64) / math.sqrt(n)
    st = SummaryStats.of(values)
    target = finite_beta_limit(cfg.beta)
    extras = {
        "q": q,
        "target": target,
        "abs_deviation": abs(st.mean - target),
        "rel_deviation": abs(st.mean - target) / target,
    }
    return ExperimentResult(cfg, values, st, extras, "lcs_over_sqrt_n")


def run_clt(cfg: ExperimentConfig) -> ExperimentResult:
    """Standardized LCS values (LCS - a n) / (sigma sqrt n) with (a, sigma) estimated from renewal blocks.

    Centering uses the ratio estimate mean(Y)/mean(X) of a, which has a much
    smaller standard error than nu00 * mean(Y) because Y and X move together.
    Every replica is a coupled run, so its renewal sandwich is checked too.
    """
    if cfg.kind is not ExperimentKind.CLT:
        raise ValueError("config kind must be clt")
    cfg.validate()
    n, q, qp = cfg.n, cfg.effective_q, cfg.effective_q_prime
    law = StationaryLaw.of(q, qp)
    x, y = renewal_xy(q, qp, cfg.effective_blocks, RngStream(cfg.seed, ESTIMATION_STREAM), cfg.cap)
    est = estimate_clt_params((x, y), law)
    a_center = math.fsum(y) / math.fsum(x)

    def replica(r: int):
        run = coupled_run(n, q, qp, RngStream(cfg.seed, r), cfg.cap)
        value = lcs(run.pi, run.tau)
        lower, upper = sandwich_bounds(run)
        return value, lower, upper

    rows = map_replicas(replica, cfg.replicas, cfg.workers)
    lcs_vals = np.array([r[0] for r in rows], dtype=np.float64)
    lower = np.array([r[1] for r in rows])
    upper = np.array([r[2] for r in rows])
    values = (lcs_vals - a_center * n) / (est.sigma_hat * math.sqrt(n))
    st = SummaryStats.of(values)
    extras = {
        "q": q,
        "q_prime": qp,
        "estimate": est.as_dict(),
        "a_center": a_center,
        "lcs_mean": math.fsum(lcs_vals) / lcs_vals.shape[0],
        "sandwich_lower_violations": int(np.sum(~(lower < lcs_vals))),
        "sandwich_upper_violations": int(np.sum(~(lcs_vals <= upper))),
    }
    return ExperimentResult(cfg, values, st, extras, "standardized_lcs")


def run_renewal(cfg: ExperimentConfig) -> ExperimentResult:
    """Block lengths and block LCS values; ``values`` holds the rows (j, x, y)."""
    if cfg.kind is not ExperimentKind.RENEWAL:
        raise ValueError("config kind must be renewal")
    cfg.validate()
    q, qp = cfg.effective_q, cfg.effective_q_prime
    law = StationaryLaw.of(q, qp)
    x, y = renewal_xy(q, qp, cfg.effective_blocks, RngStream(cfg.seed, 0), cfg.cap)
    est = estimate_clt_params((x, y), law)
    rows = np.column_stack((np.arange(1, x.shape[0] + 1), x, y))
    extras = {
        "a_hat": est.a_hat,
        "delta2_hat": est.delta2_hat,
        "sigma_hat": est.sigma_hat,
        "nu00": est.nu00,
        "se_a": est.se_a,
        "mean_block_length": math.fsum(x) / x.shape[0],
        "kac_mean": 1.0 / law.nu00,
    }
    return ExperimentResult(cfg, rows, SummaryStats.of(y), extras, "j,x,y")


def run_stationary(cfg: ExperimentConfig) -> ExperimentResult:
    """Occupation frequencies of the product chain against its stationary law on {i + j <= max_sum}."""
    if cfg.kind is not ExperimentKind.STATIONARY:
        raise ValueError("config kind must be stationary")
    cfg.validate()
    q, qp = cfg.effective_q, cfg.effective_q_prime
    law = StationaryLaw.of(q, qp)
    k = cfg.max_sum
    freq = occupation_frequencies(q, qp, cfg.steps, RngStream(cfg.seed, 0), k)
    tv = total_variation_on_triangle(freq, law, k)
    rows = [(i, j, freq[i, j], law.pmf(i, j)) for i in range(k + 1) for j in range(k + 1 - i)]
    extras = {"total_variation": tv, "steps": cfg.steps, "max_sum": k}
    return ExperimentResult(cfg, np.array(rows), SummaryStats.of(np.array([r[2] for r in rows])), extras, "i,j,empirical,stationary")


def total_variation_on_triangle(freq: np.ndarray, law: StationaryLaw, max_sum: int) -> float:
    """Total variation between empirical and stationary laws, with states outside {i+j <= max_sum} lumped."""
    diffs = []
    emp_in = []
    pmf_in = []
    for i in range(max_sum + 1):
        for j in range(max_sum + 1 - i):
            p = law.pmf(i, j)
            diffs.append(abs(freq[i, j] - p))
            emp_in.append(freq[i, j])
            pmf_in.append(p)
    rest = abs((1.0 - math.fsum(emp_in)) - (1.0 - math.fsum(pmf_in)))
    return 0.5 * (math.fsum(diffs) + rest)


RUNNERS = {
    ExperimentKind.WEAK_LAW: run_weak_law,
    ExperimentKind.FINITE_BETA: run_finite_beta,
    ExperimentKind.CLT: run_clt,
    ExperimentKind.RENEWAL: run_renewal,
    ExperimentKind.STATIONARY: run_stationary,
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg)


def emit(result: ExperimentResult, path: str | os.PathLike, fmt: str = "json") -> None:
    """Write per-replica values (CSV) or the summary (JSON); identical inputs give identical bytes."""
    fmt = fmt.lower()
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                _write_csv(result, fh)
        elif fmt == "json":
            with open(path, "w") as fh:
                fh.write(summary_json(result))
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {os.fspath(path)!r}: {exc}") from exc


def summary_json(result: ExperimentResult) -> str:
    return json.dumps(result.summary(), indent=2, sort_keys=True) + "\n"


def _write_csv(result: ExperimentResult, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    values = np.asarray(result.values)
    if values.ndim == 2:
        writer.writerow(result.value_label.split(","))
        for row in values:
            writer.writerow([_fmt(v) for v in row])
        return
    writer.writerow(["replica", "value"])
    for r, v in enumerate(values):
        writer.writerow([r, _fmt(v)])


def _fmt(v) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)

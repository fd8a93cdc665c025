"""Mallows permutations, their longest common subsequences, and Monte Carlo checks of the LCS limit laws."""

__version__ = "0.1.0"

from .limits import BudgetExceededError, QuadratureResult, euler_z, j_bar, weak_law_constant
from .perm import MallowsLaw, Permutation, enumerate_pmf, induced, inverse, inversion_count, reverse
from .regeneration import (
    CapExceededError,
    CltEstimate,
    CoupledRun,
    ProductChainState,
    RenewalBlock,
    StationaryLaw,
    coupled_run,
    estimate_clt_params,
    product_chain_step,
    renewal_blocks,
    renewal_xy,
    sandwich_bounds,
    simulate_return_time,
    stationary_pmf,
)
from .sampling import (
    InsertionTrace,
    RngStream,
    TraceKind,
    geom,
    insertion_process_prefix,
    qmallows_process,
    sample_mallows,
    truncated_geom,
)
from .subsequence import lcs, lcs_dp_oracle, lis, lis_points

__all__ = [
    "BudgetExceededError",
    "CapExceededError",
    "CltEstimate",
    "CoupledRun",
    "InsertionTrace",
    "MallowsLaw",
    "Permutation",
    "ProductChainState",
    "QuadratureResult",
    "RenewalBlock",
    "RngStream",
    "StationaryLaw",
    "TraceKind",
    "coupled_run",
    "enumerate_pmf",
    "estimate_clt_params",
    "euler_z",
    "geom",
    "induced",
    "insertion_process_prefix",
    "inverse",
    "inversion_count",
    "j_bar",
    "lcs",
    "lcs_dp_oracle",
    "lis",
    "lis_points",
    "product_chain_step",
    "qmallows_process",
    "renewal_blocks",
    "renewal_xy",
    "reverse",
    "sample_mallows",
    "sandwich_bounds",
    "simulate_return_time",
    "stationary_pmf",
    "truncated_geom",
    "weak_law_constant",
]

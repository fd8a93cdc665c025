"""Analytic constants of the LCS limit laws."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

WEAK_LAW_CONSTANT = math.sqrt(6.0) / 3.0
# beta -> 0 limit of J(beta): prefactor -> 1/sqrt(3), integrand -> sqrt(3)
J_BAR_AT_ZERO = 1.0

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class BudgetExceededError(RuntimeError):
    """Raised when an iterative computation runs out of its evaluation budget."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


def weak_law_constant() -> float:
    """sqrt(6)/3, the limit of LCS / (n sqrt(1-q)) when n(1-q) -> infinity."""
    return WEAK_LAW_CONSTANT


def euler_z(q: float) -> float:
    """Z(q) = 1 / prod_{k>=1} (1 - q^k).

    The product runs until q^k < 1e-17; the remaining factors contribute
    exp(-q^(k+1)/(1-q)) to leading order, applied as a final correction.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"euler_z needs 0 < q < 1, got {q}")
    terms = []
    k = 1
    qk = q
    while qk >= 1e-17:
        terms.append(math.log1p(-qk))
        k += 1
        qk = q**k
    terms.append(-qk / (1.0 - q))
    return math.exp(-math.fsum(terms))


def stable_integrand(x, beta: float):
    """sqrt(1 + 2 (e^{beta(x-1)} + e^{-beta x}) / (1 + e^{-beta})), overflow-free for all beta > 0."""
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(1.0 + 2.0 * (np.exp(beta * (x - 1.0)) + np.exp(-beta * x)) / (1.0 + math.exp(-beta)))


def naive_integrand(x, beta: float):
    """sqrt(cosh(beta/2) + 2 cosh(beta (2x-1)/2)); overflows for large beta."""
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.cosh(beta / 2.0) + 2.0 * np.cosh(beta * (2.0 * x - 1.0) / 2.0))


def _prefactor(beta: float) -> float:
    # sqrt(beta cosh(beta/2) / (6 sinh(beta/2))) = sqrt(beta / (6 tanh(beta/2)))
    return math.sqrt(beta / (6.0 * math.tanh(beta / 2.0)))


def _composite_gauss(f, panels: int) -> float:
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 / panels
    mids = 0.5 * (edges[:-1] + edges[1:])
    x = (mids[:, None] + half * _GL_NODES[None, :]).ravel()
    return float(half * np.dot(np.tile(_GL_WEIGHTS, panels), f(x)))


def j_bar(beta: float, tol: float = 1e-10, max_evaluations: int = 1_000_000) -> QuadratureResult:
    """J(beta) = sqrt(beta / (6 sinh(beta/2))) * int_0^1 sqrt(cosh(beta/2) + 2 cosh(beta(2x-1)/2)) dx.

    Evaluated as the prefactor sqrt(beta cosh(beta/2) / (6 sinh(beta/2)))
    times the integral of :func:`stable_integrand`, by composite 8-point
    Gauss-Legendre with the panel count doubled until two successive values
    agree within ``tol``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    scale = _prefactor(beta)

    def f(x):
        return stable_integrand(x, beta)

    panels = 1
    evaluations = _GL_NODES.size
    prev = _composite_gauss(f, panels) * scale
    while True:
        panels *= 2
        evaluations += panels * _GL_NODES.size
        if evaluations > max_evaluations:
            raise BudgetExceededError(
                f"j_bar({beta}) did not reach tol={tol} within {max_evaluations} evaluations"
            )
        cur = _composite_gauss(f, panels) * scale
        err = abs(cur - prev)
        if err <= tol and panels >= 4:
            return QuadratureResult(cur, err, evaluations)
        prev = cur


def finite_beta_limit(beta: float, tol: float = 1e-10) -> float:
    """2 J(beta), the limit of LCS / sqrt(n) when n(1-q) -> beta."""
    if beta == 0:
        return 2.0 * J_BAR_AT_ZERO
    return 2.0 * j_bar(beta, tol).value

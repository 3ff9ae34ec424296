"""Residual sweeps for the q-binomial identities used by the exact laws.

Residuals are relative, |lhs - rhs| / max(1, |lhs|, |rhs|), because the
q-binomials on the grid span many orders of magnitude.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .qcalc import q_binomial, q_number

GRID_QS = (0.3, 0.9, 1.1, 3.0)
COUNT_QS = (0.5, 2.0)


def _rel(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def neg_arg_residual(x: float, q: float) -> float:
    """[-x]_q against -q^(-x) [x]_q."""
    return _rel(q_number(-x, q), -(q ** -x) * q_number(x, q))


def neg_binomial_residual(x: float, k: int, q: float) -> float:
    """[-x choose k]_q against (-1)^k q^(-k(k+2x-1)/2) [x+k-1 choose k]_q."""
    lhs = q_binomial(-x, k, q)
    rhs = (-1) ** k * q ** (-k * (k + 2 * x - 1) / 2) * q_binomial(x + k - 1, k, q)
    return _rel(lhs, rhs)


def inverse_base_residual(x: int, k: int, q: float) -> float:
    """[x choose k]_{1/q} against q^(-k(x-k)) [x choose k]_q."""
    return _rel(q_binomial(x, k, 1.0 / q), q ** (-k * (x - k)) * q_binomial(x, k, q))


def subset_sum(n: int, k: int, q: float) -> float:
    """Sum of q^(i_1+...+i_k) over k-subsets of {1..n}, by enumeration."""
    return math.fsum(q ** sum(c) for c in itertools.combinations(range(1, n + 1), k))


def subset_count_residual(n: int, k: int, q: float) -> float:
    exact = subset_sum(n, k, q)
    closed = q ** (k * (k + 1) / 2) * q_binomial(n, k, q)
    return abs(exact - closed) / abs(exact)


def identity_sweep(points: int = 1000, seed: int = 0, max_k: int = 8, max_n: int = 12) -> dict:
    """Maximum residual of each identity over a seeded random grid.

    The subset-count identity is checked exhaustively for n <= ``max_n``.
    """
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-5.0, 5.0, points)
    qs = rng.choice(GRID_QS, points)
    ks = rng.integers(0, max_k + 1, points)
    out = {"neg_arg": 0.0, "neg_binomial": 0.0, "inverse_base": 0.0, "subset_count": 0.0}
    for x, q, k in zip(xs, qs, ks):
        out["neg_arg"] = max(out["neg_arg"], neg_arg_residual(float(x), float(q)))
        out["neg_binomial"] = max(out["neg_binomial"], neg_binomial_residual(float(x), int(k), float(q)))
        xi = int(rng.integers(k, max(k, 5) + 1))
        out["inverse_base"] = max(out["inverse_base"], inverse_base_residual(xi, int(k), float(q)))
    for q in COUNT_QS:
        for n in range(max_n + 1):
            for k in range(n + 1):
                out["subset_count"] = max(out["subset_count"], subset_count_residual(n, k, q))
    return out


TOLERANCES = {"neg_arg": 1e-11, "neg_binomial": 1e-11, "inverse_base": 1e-11, "subset_count": 1e-9}

"""q-numbers, q-factorials, q-binomials and q-Pochhammer products.

Every quantity is evaluated through ``log``/``expm1`` so that bases close
to 1 keep their significant digits.  Within ``NEAR_ONE`` of 1 the
classical limits are substituted outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

NEAR_ONE = 1e-8
_LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class QParam:
    """Base ``q`` of a q-deformation."""

    q: float

    def __post_init__(self):
        if not (self.q > 0) or not math.isfinite(self.q):
            raise ValueError(f"q must be a positive finite real, got {self.q!r}")

    @property
    def near_one(self) -> bool:
        return abs(self.q - 1.0) < NEAR_ONE

    @property
    def log(self) -> float:
        return math.log(self.q)


QLike = Union[float, QParam]


def as_qparam(q: QLike) -> QParam:
    return q if isinstance(q, QParam) else QParam(float(q))


def _log_abs_qnum(y, qp: QParam):
    """log|[y]_q| elementwise; -inf where y == 0."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        if qp.near_one:
            return np.log(np.abs(y))
        L = qp.log
        return np.log(np.abs(np.expm1(y * L))) - math.log(abs(math.expm1(L)))


def q_number(x, q: QLike):
    """[x]_q = (q^x - 1)/(q - 1); equals x when q is numerically 1."""
    qp = as_qparam(q)
    if qp.near_one:
        return x * 1.0 if np.ndim(x) == 0 else np.asarray(x, dtype=float)
    L = qp.log
    out = np.expm1(np.asarray(x, dtype=float) * L) / math.expm1(L)
    return float(out) if np.ndim(out) == 0 else out


def signed_log_q_falling(x: float, k: int, q: QLike) -> tuple[float, int]:
    """(log|[x]_{k,q}|, sign); sign 0 and log -inf when a factor vanishes."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return 0.0, 1
    qp = as_qparam(q)
    ys = x - np.arange(k, dtype=float)
    if np.any(ys == 0.0):
        return -math.inf, 0
    # sign([y]_q) = sign(y) for every q > 0
    sign = -1 if np.count_nonzero(ys < 0) % 2 else 1
    return float(np.sum(_log_abs_qnum(ys, qp))), sign


def log_q_factorial(n: int, q: QLike) -> float:
    """log [n]_q!, always defined because every factor is positive."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 0.0
    qp = as_qparam(q)
    return float(np.sum(_log_abs_qnum(np.arange(1, n + 1, dtype=float), qp)))


def signed_log_q_binomial(x: float, k: int, q: QLike) -> tuple[float, int]:
    lf, sign = signed_log_q_falling(x, k, q)
    if sign == 0:
        return lf, 0
    return lf - log_q_factorial(k, q), sign


def log_q_binomial(x: float, k: int, q: QLike) -> tuple[float, int]:
    """(log|[x choose k]_q|, sign).  Raises ValueError when the coefficient is 0."""
    lv, sign = signed_log_q_binomial(x, k, q)
    if sign == 0:
        raise ValueError(f"q-binomial [{x} choose {k}] is zero; log undefined")
    return lv, sign


def log_q_falling(x: float, k: int, q: QLike) -> tuple[float, int]:
    lv, sign = signed_log_q_falling(x, k, q)
    if sign == 0:
        raise ValueError(f"q-falling factorial [{x}]_{k} is zero; log undefined")
    return lv, sign


def _checked_exp(lv: float, what: str) -> float:
    if lv > _LOG_MAX:
        raise OverflowError(f"{what} exceeds the double range (log = {lv:.6g})")
    return math.exp(lv)


def q_factorial(n: int, q: QLike) -> float:
    return _checked_exp(log_q_factorial(n, q), f"[{n}]_q!")


def q_falling(x: float, k: int, q: QLike) -> float:
    lv, sign = signed_log_q_falling(x, k, q)
    if sign == 0:
        return 0.0
    return sign * _checked_exp(lv, f"[{x}]_{{{k},q}}")


def q_binomial(x: float, k: int, q: QLike) -> float:
    lv, sign = signed_log_q_binomial(x, k, q)
    if sign == 0:
        return 0.0
    return sign * _checked_exp(lv, f"[{x} choose {k}]_q")


def log_q_multinomial(n: int, parts: Sequence[int], q: QLike) -> float:
    parts = [int(p) for p in parts]
    if any(p < 0 for p in parts):
        raise ValueError("parts must be non-negative")
    if sum(parts) != n:
        raise ValueError(f"parts {parts} do not sum to n={n}")
    return log_q_factorial(n, q) - sum(log_q_factorial(p, q) for p in parts)


def q_multinomial(n: int, parts: Sequence[int], q: QLike) -> float:
    return _checked_exp(log_q_multinomial(n, parts, q), "q-multinomial")


def _qpoch_terms(x: float, q: float, tol: float) -> int:
    """Number of factors after which the neglected tail changes log(product) by < tol."""
    if x == 0.0 or q == 0.0:
        return 1
    ax = abs(x)
    # |log(1 - y)| <= 2|y| for |y| <= 1/2, and the tail of 2|x| q^i sums to 2|x| q^N / (1-q)
    n_small = 0 if ax <= 0.5 else math.ceil(math.log(0.5 / ax) / math.log(q))
    n_tol = math.ceil(math.log(tol * (1.0 - q) / (2.0 * ax)) / math.log(q))
    return max(n_small, n_tol, 0) + 1


def log_q_pochhammer_inf(x: float, q: float, tol: float = 1e-15) -> tuple[float, int]:
    """(log|(x; q)_inf|, sign); sign 0 when some factor 1 - x q^i is exactly 0."""
    if not (0.0 <= q < 1.0):
        raise ValueError(f"(x; q)_inf needs q in [0, 1), got {q}")
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = _qpoch_terms(x, q, tol)
    y = x * q ** np.arange(n, dtype=float)
    terms = 1.0 - y
    if np.any(terms == 0.0):
        return -math.inf, 0
    sign = -1 if np.count_nonzero(terms < 0) % 2 else 1
    big = np.abs(y) > 0.5
    logs = np.empty(n)
    logs[big] = np.log(np.abs(terms[big]))
    logs[~big] = np.log1p(-y[~big])
    return float(np.sum(logs)), sign


def q_pochhammer_inf(x: float, q: float, tol: float = 1e-15) -> float:
    """(x; q)_inf = prod_{i>=0} (1 - x q^i), relative truncation error below ``tol``."""
    lv, sign = log_q_pochhammer_inf(x, q, tol)
    if sign == 0:
        return 0.0
    return sign * math.exp(lv)

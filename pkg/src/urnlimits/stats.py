"""Empirical laws, distances and goodness-of-fit statistics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats as _st

from .dist import Pmf


@dataclass
class EmpiricalLaw:
    """Counts of observed integer values (or integer vectors)."""

    counts: dict
    n: int
    lineage: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, **lineage) -> "EmpiricalLaw":
        arr = np.asarray(samples)
        if arr.ndim == 1:
            if arr.size and not np.all(arr == np.floor(arr)):
                raise ValueError("empirical laws hold integer samples; use ks_statistic for continuous data")
            keys, cnt = np.unique(arr.astype(np.int64), return_counts=True)
            counts = {int(k): int(c) for k, c in zip(keys, cnt)}
        else:
            counts = dict(Counter(tuple(int(v) for v in row) for row in arr))
        return cls(counts, int(arr.shape[0]), dict(lineage))

    def probs(self) -> dict:
        return {k: c / self.n for k, c in self.counts.items()}


def _as_mass(law) -> tuple[dict, float]:
    if isinstance(law, EmpiricalLaw):
        return law.probs(), 0.0
    if isinstance(law, Pmf):
        return law.as_dict(), float(law.truncation_mass)
    if isinstance(law, dict):
        return dict(law), 0.0
    raise TypeError(f"TV distance needs discrete laws, got {type(law).__name__}")


def tv_interval(p, q) -> tuple[float, float]:
    """Bounds on the total-variation distance given the truncation masses of ``p`` and ``q``."""
    pm, dp = _as_mass(p)
    qm, dq = _as_mass(q)
    keys = set(pm) | set(qm)
    d = 0.5 * sum(abs(pm.get(x, 0.0) - qm.get(x, 0.0)) for x in keys)
    lo = min(1.0, d + 0.5 * abs(dp - dq))
    hi = min(1.0, d + 0.5 * (dp + dq))
    return lo, hi


def tv_distance(p, q) -> float:
    return tv_interval(p, q)[0]


def ks_statistic(sample, cdf: Callable) -> float:
    """sup |F_n - F| evaluated on both sides of every sample point."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def normal_cdf(mean: float, var: float) -> Callable:
    sd = math.sqrt(var)
    return lambda x: _st.norm.cdf(x, loc=mean, scale=sd)


def chi_square(emp: EmpiricalLaw, law: Pmf, min_expected: float = 5.0) -> tuple[float, int]:
    """Pearson statistic with adjacent cells merged until each expects >= ``min_expected``.

    Cells are taken in support order; the tail beyond the last merged cell
    absorbs the truncation mass.  Returns (statistic, degrees of freedom).
    """
    if law.support.ndim != 1:
        raise ValueError("chi_square needs a scalar law")
    n = emp.n
    observed = np.array([emp.counts.get(int(x), 0) for x in law.support], dtype=float)
    expected = n * law.probs
    tail_obs = n - observed.sum()
    tail_exp = max(n - expected.sum(), 0.0)
    bins_o, bins_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o = acc_e = 0.0
    acc_o += tail_obs
    acc_e += tail_exp
    if bins_e and acc_e < min_expected:
        bins_o[-1] += acc_o
        bins_e[-1] += acc_e
    elif acc_e > 0 or acc_o > 0:
        bins_o.append(acc_o)
        bins_e.append(acc_e)
    o = np.array(bins_o)
    e = np.array(bins_e)
    if np.any(e <= 0):
        return math.inf, max(len(e) - 1, 0)
    return float(np.sum((o - e) ** 2 / e)), max(len(e) - 1, 0)


def moments(sample) -> tuple[float, float]:
    """Mean and unbiased variance."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two observations")
    return float(x.mean()), float(x.var(ddof=1))


def run_convergence_experiment(*args, **kwargs):
    """See :func:`urnlimits.experiment.run_convergence_experiment`."""
    from .experiment import run_convergence_experiment as run

    return run(*args, **kwargs)

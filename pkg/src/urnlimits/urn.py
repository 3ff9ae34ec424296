"""Forward simulation of Polya, two-color q-Polya and l-color q-Polya urns.

Ball counts are exact integers; color 1 of a two-color urn may hold
``math.inf`` balls when q != 1.  Draw probabilities are recomputed from
the counts at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcalc import QParam, as_qparam

INF = math.inf


@dataclass(frozen=True)
class UrnConfig:
    counts0: tuple
    k: int = 1
    q: QParam = QParam(1.0)

    def __init__(self, counts0: Sequence, k: int = 1, q=1.0):
        counts = tuple(INF if (isinstance(c, float) and math.isinf(c)) or c == "inf" else int(c) for c in counts0)
        object.__setattr__(self, "counts0", counts)
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "q", as_qparam(q))
        if len(counts) < 2:
            raise ValueError("an urn needs at least two colors")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if any(c < 0 for c in counts) or sum(counts) <= 0:
            raise ValueError("initial counts must be non-negative with at least one ball")
        if INF in counts[1:]:
            raise ValueError("only color 1 may start with infinitely many balls")
        if counts[0] == INF and (len(counts) != 2 or self.q.near_one):
            raise ValueError("infinitely many balls need a two-color urn with q != 1")

    @property
    def colors(self) -> int:
        return len(self.counts0)


@dataclass(frozen=True)
class UrnState:
    counts: tuple
    draws: tuple
    n: int = 0

    @classmethod
    def initial(cls, config: UrnConfig) -> "UrnState":
        return cls(config.counts0, (0,) * config.colors, 0)


@dataclass
class Path:
    """States recorded along one urn run: ``values[i]`` holds the counts after ``times[i]`` draws."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")


def color_probabilities(counts, q) -> np.ndarray:
    """Draw probabilities for count rows ``counts`` (shape (..., l)).

    q < 1 uses the line experiment with color 1 first; q > 1 runs the same
    experiment with base 1/q on the reversed color order.
    """
    qp = as_qparam(q)
    w = np.asarray(counts, dtype=float)
    if qp.near_one:
        return w / w.sum(axis=-1, keepdims=True)
    L = qp.log
    if L > 0:
        return color_probabilities(w[..., ::-1], 1.0 / qp.q)[..., ::-1]
    s = np.cumsum(w, axis=-1)
    s_prev = np.concatenate([np.zeros_like(w[..., :1]), s[..., :-1]], axis=-1)
    with np.errstate(invalid="ignore"):
        head = np.exp(s_prev * L)
        p = head * (-np.expm1(w * L)) / (-np.expm1(s[..., -1:] * L))
    return np.where(w == 0, 0.0, p)


def draw_probabilities(state: UrnState, config: UrnConfig) -> np.ndarray:
    if len(state.counts) != config.colors:
        raise ValueError("state and config disagree on the number of colors")
    return color_probabilities(np.array(state.counts, dtype=float), config.q)


def _pick(p: np.ndarray, u):
    """Index of the color selected by uniform(s) ``u`` under probabilities ``p``."""
    cum = np.cumsum(p, axis=-1)[..., :-1]
    return np.sum(np.asarray(u)[..., None] >= cum, axis=-1)


def step(state: UrnState, config: UrnConfig, rng: np.random.Generator) -> UrnState:
    p = draw_probabilities(state, config)
    i = int(_pick(p, rng.random()))
    counts = list(state.counts)
    draws = list(state.draws)
    counts[i] = counts[i] + config.k
    draws[i] += 1
    return UrnState(tuple(counts), tuple(draws), state.n + 1)


def simulate_path(config: UrnConfig, horizon_n: int, stride: int, rng: np.random.Generator) -> Path:
    """Run ``horizon_n`` draws, recording the counts every ``stride`` draws and at the end."""
    if horizon_n < 1 or stride < 1:
        raise ValueError("horizon_n and stride must be positive")
    state = UrnState.initial(config)
    times = [0]
    values = [state.counts]
    for n in range(1, horizon_n + 1):
        state = step(state, config, rng)
        if n % stride == 0 or n == horizon_n:
            times.append(n)
            values.append(state.counts)
    return Path(
        np.array(times),
        np.array(values, dtype=float),
        meta={"counts0": list(config.counts0), "k": config.k, "q": config.q.q},
    )


def simulate_draws(
    config: UrnConfig, checkpoints: Sequence[int], size: int, rng: np.random.Generator
) -> np.ndarray:
    """Replicated runs; returns per-color draw counts, shape (size, len(checkpoints), l).

    The white/black case is specialised because only one uniform and one
    comparison per replicate are needed per draw.
    """
    cps = np.asarray(checkpoints, dtype=int)
    if np.any(np.diff(cps) < 0) or (cps.size and cps[0] < 0):
        raise ValueError("checkpoints must be non-decreasing and non-negative")
    l = config.colors
    out = np.zeros((size, len(cps), l), dtype=np.int64)
    horizon = int(cps[-1]) if cps.size else 0
    c0 = np.array(config.counts0, dtype=float)
    k = config.k
    draws = np.zeros((size, l), dtype=np.int64)
    ci = 0
    while ci < len(cps) and cps[ci] == 0:
        ci += 1
    if l == 2:
        white = np.zeros(size, dtype=np.int64)
        qp = config.q
        L = qp.log
        for n in range(horizon):
            w = c0[0] + k * white
            tot = c0[0] + c0[1] + k * n
            if qp.near_one:
                p = w / tot
            elif L < 0:
                p = np.expm1(w * L) / math.expm1(tot * L)
            else:
                b = tot - w if math.isfinite(tot) else c0[1] + k * (n - white)
                p = np.exp(-b * L) * (-np.expm1(-w * L)) / (-math.expm1(-tot * L))
            white += rng.random(size) < p
            while ci < len(cps) and cps[ci] == n + 1:
                out[:, ci, 0] = white
                out[:, ci, 1] = n + 1 - white
                ci += 1
        return out
    rows = np.arange(size)
    for n in range(horizon):
        p = color_probabilities(c0 + k * draws, config.q)
        idx = _pick(p, rng.random(size))
        draws[rows, idx] += 1
        while ci < len(cps) and cps[ci] == n + 1:
            out[:, ci, :] = draws
            ci += 1
    return out

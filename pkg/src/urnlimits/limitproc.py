"""Limit processes: pure-birth and Poisson processes, ODE limits, fluctuation SDEs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .dist import NegativeBinomial, q_birth_p, qpolya_poisson_rate


class NumericGuardError(ArithmeticError):
    """A solver refused to continue because the step would be unstable."""


@dataclass
class GridPath:
    """Values on a uniform grid ``t_i = i * dt``; ``noise`` holds the driving increments."""

    dt: float
    values: np.ndarray
    noise: np.ndarray | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.shape[-1])


def uniform_grid(t_max: float, dt: float) -> np.ndarray:
    n = int(round(t_max / dt))
    if n < 1 or abs(n * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError(f"t_max={t_max} is not a multiple of dt={dt}")
    return dt * np.arange(n + 1)


def brownian_increments(n_steps: int, dt: float, rng: np.random.Generator, size=None) -> np.ndarray:
    shape = (n_steps,) if size is None else (size, n_steps)
    return rng.normal(0.0, math.sqrt(dt), size=shape)


def coarsen_noise(dw: np.ndarray, factor: int = 2) -> np.ndarray:
    """Sum consecutive increments so the same Brownian path drives a coarser grid."""
    n = dw.shape[-1]
    if n % factor:
        raise ValueError("number of increments is not divisible by the factor")
    return dw.reshape(*dw.shape[:-1], n // factor, factor).sum(axis=-1)


# ---------------------------------------------------------------- birth processes


@dataclass(frozen=True)
class BirthRateSpec:
    """Pure-birth limit with rate (k j + w0)/(k t + b0) (polya) or (w0 + j k) log c/(c^{b0+kt} - 1)."""

    family: str
    w0: int
    k: int = 1
    b0: float = 1.0
    c: float | None = None

    def __post_init__(self):
        if self.family not in ("polya", "q-polya"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.w0 < 1 or self.k < 1:
            raise ValueError("w0 and k must be positive integers")
        if not self.b0 > 0:
            raise ValueError("b0 = 0 makes the rate infinite at t = 0")
        if self.family == "q-polya" and not (self.c is not None and self.c > 1):
            raise ValueError("q-polya family needs c > 1")

    def rate(self, t: float, j: int) -> float:
        if self.family == "polya":
            return (self.k * j + self.w0) / (self.k * t + self.b0)
        L = math.log(self.c)
        return (self.w0 + j * self.k) * L / math.expm1((self.b0 + self.k * t) * L)

    def increment_law(self, t1: float, t2: float, j) -> NegativeBinomial:
        nu = self.w0 / self.k + j
        return NegativeBinomial(nu, self.increment_p(t1, t2))

    def increment_p(self, t1: float, t2: float) -> float:
        if self.family == "polya":
            return (t1 + self.b0 / self.k) / (t2 + self.b0 / self.k)
        return q_birth_p(self.b0, self.k, self.c, t1, t2)

    def next_jump(self, s: float, j: int, e: float) -> float:
        """Time at which the integrated rate from ``s`` at level ``j`` reaches ``e``; inf if never."""
        nu = self.w0 / self.k + j
        if self.family == "polya":
            return ((self.k * s + self.b0) * math.exp(e / nu) - self.b0) / self.k
        # integrated rate: nu * [log(1 - c^-(b0+kt)) - log(1 - c^-(b0+ks))]
        L = math.log(self.c)
        rhs = math.log(-math.expm1(-(self.b0 + self.k * s) * L)) + e / nu
        if rhs >= 0:
            return math.inf
        v = -math.log(-math.expm1(rhs)) / L
        return (v - self.b0) / self.k


def birth_sample_grid(spec: BirthRateSpec, times: Sequence[float], size: int, rng: np.random.Generator) -> np.ndarray:
    """Z on ``times`` (shape (size, len(times))) from exact negative-binomial increments."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    z = np.zeros((size, len(times)), dtype=np.int64)
    for i in range(1, len(times)):
        nu = spec.w0 / spec.k + z[:, i - 1]
        z[:, i] = z[:, i - 1] + rng.negative_binomial(nu, spec.increment_p(times[i - 1], times[i]))
    return z


def birth_sample_events(spec: BirthRateSpec, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Jump times in [0, horizon] by inverting the integrated rate between jumps."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    events = []
    t, j = 0.0, 0
    while True:
        t = spec.next_jump(t, j, rng.standard_exponential())
        if t > horizon:
            return np.array(events)
        events.append(t)
        j += 1


def count_at(events: np.ndarray, times: Sequence[float]) -> np.ndarray:
    return np.searchsorted(events, np.asarray(times, dtype=float), side="right")


def poisson_sample(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Event times of a homogeneous Poisson process on [0, horizon] via exponential gaps."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    events = []
    t = rng.exponential(1.0 / rate)
    while t <= horizon:
        events.append(t)
        t += rng.exponential(1.0 / rate)
    return np.array(events)


def qpolya_rate(b0: float, c: float) -> float:
    """Poisson rate of the q-urn in the sublinear regime; 1/b0 as c -> 1."""
    return qpolya_poisson_rate(b0, c)


# ---------------------------------------------------------------- deterministic limits


def _check_ab(a, b):
    if a < 0 or b < 0 or a + b == 0:
        raise ValueError("a, b must be non-negative and not both zero")


def polya_det_limit(a: float, b: float, k: float, t):
    _check_ab(a, b)
    return a * (a + b + k * np.asarray(t, dtype=float)) / (a + b)


def qpolya_det_limit(a: float, b: float, k: float, c: float, t):
    """Closed-form solution of X' = k (1 - c^X)/(1 - c^{a+b+kt}), X_0 = a."""
    _check_ab(a, b)
    if not c > 0:
        raise ValueError("c must be positive")
    t = np.asarray(t, dtype=float)
    L = math.log(c)
    if L == 0:
        return polya_det_limit(a, b, k, t)
    ea = math.expm1(-a * L)
    den = math.expm1(b * L) - ea
    # log of (c^b - 1 + c^{-kt}(1 - c^{-a}))/(c^b - c^{-a}), written as log1p to survive c -> 1
    return a - np.log1p(-ea * np.expm1(-k * t * L) / den) / L


def multicolor_det_limit(a: Sequence[float], k: float, c: float, t, regime: int = 1) -> np.ndarray:
    """Per-color limit of A/m; regime 1 for q = c^{1/m}, regime 2 for q = 1 + o(1/m)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or a.sum() == 0:
        raise ValueError("a must be non-negative and not all zero")
    t = np.asarray(t, dtype=float)[..., None]
    sig = np.cumsum(a)
    if regime == 2:
        return (1 + k * t / sig[-1]) * a
    if regime != 1:
        raise ValueError("regime must be 1 or 2")
    if not 0 < c < 1:
        raise ValueError("regime 1 needs c in (0, 1)")
    L = math.log(c)
    sig_prev = np.concatenate([[0.0], sig[:-1]])
    base = -np.expm1((sig[-1] + k * t) * L)
    one_minus = -np.expm1(k * t * L)
    num = base - np.exp(sig_prev * L) * one_minus
    den = base - np.exp(sig * L) * one_minus
    return a + np.log(num / den) / L


def multicolor_ode_rhs(x: np.ndarray, a: Sequence[float], k: float, c: float, t: float) -> np.ndarray:
    """Right-hand side k c^{sigma_l + kt - sum_{j>=i} X_j} (1 - c^{X_i})/(1 - c^{sigma_l + kt})."""
    a = np.asarray(a, dtype=float)
    tot = a.sum() + k * t
    tail = np.cumsum(x[::-1])[::-1]
    return k * c ** (tot - tail) * (1 - c**x) / (1 - c**tot)


# ---------------------------------------------------------------- SDEs


@dataclass
class SdeSpec:
    """Linear SDE dY = (alpha(t) Y + beta(t)) dt + gamma(t) dW."""

    alpha: Callable[[np.ndarray], np.ndarray]
    beta: Callable[[np.ndarray], np.ndarray]
    gamma: Callable[[np.ndarray], np.ndarray]
    y0: float = 0.0
    family: str = "generic-linear"
    params: dict = field(default_factory=dict)

    def drift(self, t, y):
        return self.alpha(t) * y + self.beta(t)


def polya_fluct_spec(a: float, b: float, k: float = 1, theta1: float = 0.0, theta2: float = 0.0) -> SdeSpec:
    _check_ab(a, b)
    lam = a / (a + b)
    sd = k * math.sqrt(a * b) / (a + b)
    return SdeSpec(
        alpha=lambda t: k / (a + b + k * np.asarray(t, dtype=float)),
        beta=lambda t: -k * lam * (theta1 + theta2) / (a + b + k * np.asarray(t, dtype=float)),
        gamma=lambda t: sd + 0.0 * np.asarray(t, dtype=float),
        y0=theta1,
        family="polya-fluct",
        params=dict(a=a, b=b, k=k, theta1=theta1, theta2=theta2),
    )


def qpolya_fluct_spec(a: float, b: float, k: float, c: float, theta1: float = 0.0, theta2: float = 0.0) -> SdeSpec:
    """Coefficients of the q-urn fluctuation SDE, written with expm1 for c near 1."""
    _check_ab(a, b)
    if not c > 1:
        raise ValueError("c must exceed 1")
    L = math.log(c)
    ea, eb, eab = math.expm1(a * L), math.expm1(b * L), math.expm1((a + b) * L)

    def D(t):
        # c^{a+b+kt} - c^{a+kt} + c^a - 1
        return np.exp((a + k * np.asarray(t, dtype=float)) * L) * eb + ea

    def alpha(t):
        t = np.asarray(t, dtype=float)
        return k * L * eab * np.exp((a + k * t) * L) / (np.expm1((a + b + k * t) * L) * D(t))

    shift = math.exp(b * L) * ea * (theta1 + theta2) / eab

    def beta(t):
        return -alpha(t) * shift

    def gamma(t):
        t = np.asarray(t, dtype=float)
        return k * math.sqrt(ea * eb) * np.exp((a + k * t) * L / 2) / D(t)

    return SdeSpec(alpha, beta, gamma, y0=theta1, family="q-polya-fluct", params=dict(a=a, b=b, k=k, c=c, theta1=theta1, theta2=theta2))


def euler_maruyama(spec: SdeSpec, dt: float, noise: np.ndarray) -> GridPath:
    """Explicit Euler-Maruyama over the increments ``noise`` (shape (..., n_steps))."""
    noise = np.asarray(noise, dtype=float)
    n = noise.shape[-1]
    t = dt * np.arange(n)
    a = np.asarray(spec.alpha(t), dtype=float)
    if np.any(np.abs(a) * dt >= 1):
        raise NumericGuardError(f"|alpha| dt reaches {np.max(np.abs(a)) * dt:.3g}; refine the grid")
    bt = np.asarray(spec.beta(t), dtype=float)
    g = np.asarray(spec.gamma(t), dtype=float)
    y = np.empty(noise.shape[:-1] + (n + 1,))
    y[..., 0] = spec.y0
    for i in range(n):
        y[..., i + 1] = y[..., i] + (a[i] * y[..., i] + bt[i]) * dt + g[i] * noise[..., i]
    if not np.all(np.isfinite(y)):
        raise NumericGuardError("Euler-Maruyama produced non-finite values")
    return GridPath(dt, y, noise)


def linear_sde_solution(spec: SdeSpec, dt: float, noise: np.ndarray) -> GridPath:
    """Y_t = e^{A_t}(y0 + int beta e^{-A} ds + int gamma e^{-A} dW), A_t = int_0^t alpha.

    Time integrals by cumulative Simpson, the Ito integral by left-point sums.
    """
    noise = np.asarray(noise, dtype=float)
    n = noise.shape[-1]
    t = dt * np.arange(n + 1)
    A = _cumint(np.asarray(spec.alpha(t), dtype=float), dt)
    det = _cumint(np.asarray(spec.beta(t), dtype=float) * np.exp(-A), dt)
    integrand = (np.asarray(spec.gamma(t), dtype=float) * np.exp(-A))[:-1]
    stoch = np.concatenate([np.zeros(noise.shape[:-1] + (1,)), np.cumsum(integrand * noise, axis=-1)], axis=-1)
    return GridPath(dt, np.exp(A) * (spec.y0 + det + stoch), noise)


def _cumint(f: np.ndarray, dt: float) -> np.ndarray:
    f = np.broadcast_to(f, f.shape)
    if f.shape[-1] == 2:
        return np.array([0.0, 0.5 * dt * (f[0] + f[1])])
    return cumulative_simpson(f, dx=dt, initial=0.0)


def polya_fluct_solution(a, b, k, theta1, theta2, dt: float, noise: np.ndarray) -> GridPath:
    """Closed-form fluctuation limit of the Polya urn, Ito integral by left-point sums."""
    _check_ab(a, b)
    noise = np.asarray(noise, dtype=float)
    n = noise.shape[-1]
    t = dt * np.arange(n + 1)
    tot = a + b + k * t
    ito = np.concatenate([np.zeros(noise.shape[:-1] + (1,)), np.cumsum(noise / tot[:-1], axis=-1)], axis=-1)
    y = theta1 + (b * theta1 - a * theta2) / (a + b) ** 2 * k * t + k * math.sqrt(a * b) / (a + b) * tot * ito
    return GridPath(dt, y, noise)


def qpolya_fluct_solution(a, b, k, c, theta1, theta2, dt: float, noise: np.ndarray) -> GridPath:
    """q-urn fluctuation limit generated from the generic linear-SDE solution."""
    return linear_sde_solution(qpolya_fluct_spec(a, b, k, c, theta1, theta2), dt, noise)


def qpolya_fluct_closed_form(a, b, k, c, theta1, theta2, dt: float, noise: np.ndarray) -> GridPath:
    """Direct transcription of the closed form, stochastic integrand taken in the integration variable."""
    _check_ab(a, b)
    L = math.log(c)
    ea, eb, eab = math.expm1(a * L), math.expm1(b * L), math.expm1((a + b) * L)
    noise = np.asarray(noise, dtype=float)
    n = noise.shape[-1]
    t = dt * np.arange(n + 1)
    e_tot = np.expm1((a + b + k * t) * L)
    D = np.exp((a + k * t) * L) * eb + ea
    integrand = (np.exp((a + k * t) * L / 2) / e_tot)[:-1]
    ito = np.concatenate([np.zeros(noise.shape[:-1] + (1,)), np.cumsum(integrand * noise, axis=-1)], axis=-1)
    inner = theta1 - (theta1 + theta2) * math.exp((a + b) * L) * ea / eab * np.expm1(k * t * L) / e_tot
    y = e_tot / D * (inner + k * math.sqrt(ea * eb) * ito)
    return GridPath(dt, y, noise)


def polya_fluct_moments(a, b, k, theta1, theta2, t) -> tuple:
    """Mean and variance of the Gaussian Polya fluctuation limit at time t."""
    _check_ab(a, b)
    t = np.asarray(t, dtype=float)
    mean = theta1 + (b * theta1 - a * theta2) / (a + b) ** 2 * k * t
    var = k**2 * a * b * t * (a + b + k * t) / (a + b) ** 3
    return mean, var


def linear_sde_moments(spec: SdeSpec, t: float, n: int = 20000) -> tuple[float, float]:
    """Mean and variance of a linear SDE with deterministic coefficients, by Simpson quadrature."""
    dt = t / n
    s = dt * np.arange(n + 1)
    A = cumulative_simpson(np.asarray(spec.alpha(s), dtype=float), dx=dt, initial=0.0)
    det = cumulative_simpson(np.asarray(spec.beta(s), dtype=float) * np.exp(-A), dx=dt, initial=0.0)
    g2 = (np.asarray(spec.gamma(s), dtype=float) * np.exp(-A)) ** 2
    var_int = cumulative_simpson(g2, dx=dt, initial=0.0)
    return float(np.exp(A[-1]) * (spec.y0 + det[-1])), float(np.exp(2 * A[-1]) * var_int[-1])

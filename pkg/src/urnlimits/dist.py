"""Exact laws of urn draw counts and of their scaling limits.

All mass functions are assembled in log-space and exponentiated last.
Laws with infinite support are returned as :class:`Pmf` objects truncated
where a proven tail bound drops below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .qcalc import (
    NEAR_ONE,
    QParam,
    as_qparam,
    log_q_factorial,
    log_q_pochhammer_inf,
    signed_log_q_binomial,
)

INF = math.inf


@dataclass
class Pmf:
    """Discrete law on integers (or integer vectors) with explicit truncation.

    ``support`` has shape (n,) for scalar laws and (n, d) for vector laws.
    ``truncation_mass`` bounds the probability lying outside ``support``.
    """

    support: np.ndarray
    probs: np.ndarray
    truncation_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.support = np.asarray(self.support)
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs differ in length")
        if np.any(self.probs < 0):
            raise ValueError("negative probability")
        if self.truncation_mass < 0:
            raise ValueError("truncation_mass must be >= 0")

    @property
    def total(self) -> float:
        return float(np.sum(self.probs))

    def as_dict(self) -> dict:
        if self.support.ndim == 1:
            keys = [int(x) for x in self.support]
        else:
            keys = [tuple(int(v) for v in row) for row in self.support]
        return dict(zip(keys, self.probs.tolist()))

    def mean(self) -> np.ndarray | float:
        m = np.tensordot(self.probs, self.support.astype(float), axes=1)
        return float(m) if np.ndim(m) == 0 else m


@dataclass(frozen=True)
class UrnLawParams:
    """Initial white ``r`` (may be ``inf``), black ``s``, balls added ``k``, base ``q``."""

    r: float
    s: int
    k: int
    q: QParam

    def __init__(self, r, s, k, q):
        r = INF if r in (INF, "inf", "infinity") else int(r)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", int(s))
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "q", as_qparam(q))
        if self.s < 0 or (self.r != INF and self.r < 0):
            raise ValueError("ball counts must be non-negative")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.r + self.s <= 0:
            raise ValueError("the urn needs at least one ball")

    @property
    def a(self) -> float:
        return self.r / self.k

    @property
    def b(self) -> float:
        return self.s / self.k


# ---------------------------------------------------------------- classical


def _log_rising(a: float, n: int) -> float:
    """log of a(a+1)...(a+n-1) for a >= 0; -inf when a == 0 and n >= 1."""
    if n == 0:
        return 0.0
    if a == 0:
        return -INF
    return float(gammaln(a + n) - gammaln(a))


def _log_choose(n: int, x: int) -> float:
    return float(gammaln(n + 1) - gammaln(x + 1) - gammaln(n - x + 1))


def nb_pmf(nu: float, p: float, x) -> float | np.ndarray:
    """Negative binomial NB(nu, p): C(x+nu-1, x) p^nu (1-p)^x, real nu > 0."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ValueError("x must be a non-negative integer")
    logf = gammaln(x + nu) - gammaln(nu) - gammaln(x + 1.0) + nu * math.log(p) + x * math.log1p(-p)
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


def poisson_pmf(lam: float, x) -> float | np.ndarray:
    if not lam > 0:
        raise ValueError(f"rate must be positive, got {lam}")
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ValueError("x must be a non-negative integer")
    out = np.exp(-lam + x * math.log(lam) - gammaln(x + 1.0))
    return float(out) if out.ndim == 0 else out


def polya_transition_pmf(n: int, x: int, sigma: float, tau: float) -> float:
    """(n)_x/x! * sigma^(x) tau^(n-x) / (sigma+tau)^(n) with rising factorials."""
    if n < 0 or not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    if not (sigma > 0 and tau > 0):
        raise ValueError("sigma and tau must be positive")
    return _polya_log(n, x, sigma, tau, exp=True)


def _polya_log(n, x, sigma, tau, exp=False):
    lv = _log_choose(n, x) + _log_rising(sigma, x) + _log_rising(tau, n - x) - _log_rising(sigma + tau, n)
    return math.exp(lv) if exp else lv


def _qbinom_log(x, k, q):
    lv, sign = signed_log_q_binomial(x, k, q)
    if sign < 0:
        raise ArithmeticError(f"negative q-binomial [{x} choose {k}] in a positive form")
    return lv


def qpolya_transition_pmf(n: int, x: int, sigma: float, tau: float, rhat: float) -> float:
    """r^(tau x) [sigma+x-1, x]_r [tau+n-x-1, n-x]_r / [sigma+tau+n-1, n]_r with r = q^-k."""
    if n < 0 or not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    if not (sigma > 0 and tau > 0):
        raise ValueError("sigma and tau must be positive")
    if not 0 < rhat < 1:
        raise ValueError(f"rhat must lie in (0, 1), got {rhat}")
    lv = (
        tau * x * math.log(rhat)
        + _qbinom_log(sigma + x - 1, x, rhat)
        + _qbinom_log(tau + n - x - 1, n - x, rhat)
        - _qbinom_log(sigma + tau + n - 1, n, rhat)
    )
    return math.exp(lv)


# ---------------------------------------------------------------- q-Polya draws


def qpolya_draw_log_pmf(params: UrnLawParams, n: int, x: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= x <= n:
        raise ValueError(f"x={x} outside [0, {n}]")
    qp, k, s = params.q, params.k, params.s
    b = params.b
    if params.r == INF:
        if not qp.q > 1:
            raise ValueError("r = inf is supported only for q > 1")
        Q = qp.q ** (-k)
        return (
            -s * x * qp.log
            + (n - x) * math.log1p(-Q)
            + _qbinom_log(b + n - x - 1, n - x, Q)
            + log_q_factorial(n, Q)
            - log_q_factorial(x, Q)
        )
    a = params.a
    if qp.near_one:
        return _polya_log(n, x, a, b)
    Q = qp.q ** (-k)
    return (
        -s * x * qp.log
        + _qbinom_log(a + x - 1, x, Q)
        + _qbinom_log(b + n - x - 1, n - x, Q)
        - _qbinom_log(a + b + n - 1, n, Q)
    )


def qpolya_draw_pmf(params: UrnLawParams, n: int, x: int) -> float:
    """P(X_n = x): number of white draws among the first n draws."""
    return math.exp(qpolya_draw_log_pmf(params, n, x))


def qpolya_draw_law(params: UrnLawParams, n: int) -> Pmf:
    xs = np.arange(n + 1)
    return Pmf(xs, [qpolya_draw_pmf(params, n, int(x)) for x in xs], meta={"law": "qpolya-draw"})


# ---------------------------------------------------------------- extinction


def extinction_log_pmf(params: UrnLawParams, x: int, tol: float = 1e-15) -> float:
    qp = params.q
    if not qp.q > 1 or qp.near_one:
        raise ValueError("extinction law needs q > 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    if params.s == 0:
        raise ValueError("s = 0: white balls are drawn forever, no extinction law")
    k, s = params.k, params.s
    Q = qp.q ** (-k)
    qs = qp.q ** (-s)
    lnum, _ = log_q_pochhammer_inf(qs, Q, tol)
    if params.r == INF:
        return x * (math.log(qs) - math.log1p(-Q)) - log_q_factorial(x, Q) + lnum
    lden, _ = log_q_pochhammer_inf(qp.q ** (-params.r - s), Q, tol)
    return -s * x * qp.log + _qbinom_log(params.a + x - 1, x, Q) + lnum - lden


def extinction_pmf(params: UrnLawParams, x: int, tol: float = 1e-15) -> float:
    """Law of the total number of white draws when q > 1 (finite r, or r = inf)."""
    return math.exp(extinction_log_pmf(params, x, tol))


def extinction_law(params: UrnLawParams, tol: float = 1e-12, max_x: int | None = None) -> Pmf:
    """Truncated extinction law; the tail beyond the support is bounded geometrically.

    For x >= x0 the ratio f(x+1)/f(x) is at most q^-s / (1 - q^{-k(x0+1)}),
    so the tail is at most f(x0+1) / (1 - ratio) once that ratio is < 1.
    With ``max_x`` the table stops there and reports 1 - sum as the tail.
    """
    qs = params.q.q ** (-params.s)
    Q = params.q.q ** (-params.k)
    probs = []
    x = 0
    while True:
        probs.append(extinction_pmf(params, x))
        if max_x is not None and x >= max_x:
            # the law is normalized, so the tail mass is the exact complement
            tail = max(0.0, 1.0 - math.fsum(probs))
            return Pmf(np.arange(x + 1), probs, truncation_mass=tail, meta={"law": "extinction"})
        rho = qs / (1.0 - Q ** (x + 1))
        if rho < 1:
            nxt = extinction_pmf(params, x + 1)
            bound = nxt / (1.0 - rho)
            if bound < tol:
                return Pmf(np.arange(x + 1), probs, truncation_mass=bound, meta={"law": "extinction"})
        x += 1
        if x > 1_000_000:
            raise RuntimeError("extinction law truncation did not terminate")


# ---------------------------------------------------------------- many colors


def _check_colors(a, x, n=None):
    a = [int(v) for v in a]
    if len(a) < 2:
        raise ValueError("need at least two colors")
    if any(v < 0 for v in a) or sum(a) == 0:
        raise ValueError("initial counts must be non-negative and not all zero")
    x = [int(v) for v in x]
    if len(x) != len(a) - 1:
        raise ValueError(f"expected {len(a) - 1} counts for colors 2..l, got {len(x)}")
    if any(v < 0 for v in x):
        raise ValueError("counts must be non-negative")
    if n is not None and sum(x) > n:
        raise ValueError(f"counts sum to {sum(x)} > n={n}")
    return a, x


def multicolor_log_pmf(a: Sequence[int], k: int, q: float, n: int, x: Sequence[int]) -> float:
    if not 0 < q < 1:
        raise ValueError("the many-color law is stated for q in (0, 1)")
    a, x = _check_colors(a, x, n)
    xs = [n - sum(x)] + x
    if abs(q - 1) < NEAR_ONE:
        lv = float(gammaln(n + 1) - sum(gammaln(v + 1) for v in xs))
        lv += sum(_log_rising(ai / k, xi) for ai, xi in zip(a, xs)) - _log_rising(sum(a) / k, n)
        return lv
    Q = q ** (-k)
    # positive form: q^{-sum_{i<j} a_j x_i} prod [a_i/k + x_i - 1, x_i]_Q / [sum a/k + n - 1, n]_Q
    expo = sum(a[j] * xs[i] for i in range(len(a)) for j in range(i + 1, len(a)))
    lv = -expo * math.log(q)
    for ai, xi in zip(a, xs):
        lv += _qbinom_log(ai / k + xi - 1, xi, Q)
    return lv - _qbinom_log(sum(a) / k + n - 1, n, Q)


def multicolor_pmf(a: Sequence[int], k: int, q: float, n: int, x: Sequence[int]) -> float:
    """P(X_{n,2}=x_2, ..., X_{n,l}=x_l) for the l-color q-Polya urn, q in (0, 1)."""
    return math.exp(multicolor_log_pmf(a, k, q, n, x))


def _compositions(total_max: int, parts: int):
    if parts == 0:
        yield ()
        return
    for v in range(total_max + 1):
        for rest in _compositions(total_max - v, parts - 1):
            yield (v,) + rest


def multicolor_law(a: Sequence[int], k: int, q: float, n: int) -> Pmf:
    pts = list(_compositions(n, len(a) - 1))
    probs = [multicolor_pmf(a, k, q, n, p) for p in pts]
    return Pmf(np.array(pts, dtype=int), probs, meta={"law": "multicolor"})


def multicolor_limit_log_pmf(a: Sequence[int], k: int, q: float, x: Sequence[int], tol: float = 1e-15) -> float:
    if not 0 < q < 1:
        raise ValueError("the many-color limit law needs q in (0, 1)")
    a, x = _check_colors(a, x)
    if a[0] == 0:
        raise ValueError("color 1 must be present initially for the other colors to go extinct")
    qk = q**k
    sig = np.cumsum(a)
    lv = sum(xi * sig[i] for i, xi in enumerate(x)) * math.log(q)
    for ai, xi in zip(a[1:], x):
        lv += _qbinom_log(xi + ai / k - 1, xi, qk)
    lnum, _ = log_q_pochhammer_inf(q ** a[0], qk, tol)
    lden, _ = log_q_pochhammer_inf(q ** int(sig[-1]), qk, tol)
    return lv + lnum - lden


def multicolor_limit_pmf(a: Sequence[int], k: int, q: float, x: Sequence[int], tol: float = 1e-15) -> float:
    """Joint law of the total draws of colors 2..l (q in (0, 1)); a product law."""
    return math.exp(multicolor_limit_log_pmf(a, k, q, x, tol))


def multicolor_limit_law(a: Sequence[int], k: int, q: float, box: int) -> Pmf:
    """Limit law on the box {0..box}^(l-1); truncation mass from the product structure."""
    a = [int(v) for v in a]
    pts = np.array(np.meshgrid(*[np.arange(box + 1)] * (len(a) - 1), indexing="ij")).reshape(len(a) - 1, -1).T
    probs = np.array([multicolor_limit_pmf(a, k, q, p) for p in pts])
    return Pmf(pts, probs, truncation_mass=max(0.0, 1.0 - float(probs.sum())), meta={"law": "multicolor-limit"})


# ---------------------------------------------------------------- limit increments


@dataclass(frozen=True)
class NegativeBinomial:
    nu: float
    p: float

    def __post_init__(self):
        if not self.nu > 0 or not 0 < self.p < 1:
            raise ValueError(f"invalid NB({self.nu}, {self.p})")

    def pmf(self, x):
        return nb_pmf(self.nu, self.p, x)

    @property
    def mean(self) -> float:
        return self.nu * (1 - self.p) / self.p

    @property
    def var(self) -> float:
        return self.nu * (1 - self.p) / self.p**2

    def sf(self, x) -> float:
        """P(X > x)."""
        return float(stats.nbinom.sf(x, self.nu, self.p))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.negative_binomial(self.nu, self.p, size=size)

    def to_pmf(self, tol: float = 1e-12) -> Pmf:
        hi = int(stats.nbinom.isf(tol, self.nu, self.p)) + 1
        xs = np.arange(hi + 1)
        return Pmf(xs, self.pmf(xs), truncation_mass=self.sf(hi), meta={"law": "nb", "nu": self.nu, "p": self.p})


@dataclass(frozen=True)
class Poisson:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"invalid Poisson({self.lam})")

    def pmf(self, x):
        return poisson_pmf(self.lam, x)

    @property
    def mean(self) -> float:
        return self.lam

    @property
    def var(self) -> float:
        return self.lam

    def sf(self, x) -> float:
        return float(stats.poisson.sf(x, self.lam))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.poisson(self.lam, size=size)

    def to_pmf(self, tol: float = 1e-12) -> Pmf:
        hi = int(stats.poisson.isf(tol, self.lam)) + 1
        xs = np.arange(hi + 1)
        return Pmf(xs, self.pmf(xs), truncation_mass=self.sf(hi), meta={"law": "poisson", "lam": self.lam})


REGIMES = ("polya-birth", "polya-poisson", "q-birth", "q-poisson")


def qpolya_poisson_rate(b0: float, c: float) -> float:
    """log c / (c^b0 - 1), with the c -> 1 limit 1/b0."""
    if not b0 > 0:
        raise ValueError("b0 must be positive")
    L = math.log(c)
    if abs(L) < 1e-300:
        return 1.0 / b0
    return L / math.expm1(b0 * L)


def q_birth_p(b0: float, k: int, c: float, t1: float, t2: float) -> float:
    """(1 - rho_1)/(1 - rho_2) with rho_i = c^{-b0-k t_i}; tends to (t1+b0/k)/(t2+b0/k) as c -> 1."""
    L = math.log(c)
    if abs(L) < 1e-300:
        return (t1 + b0 / k) / (t2 + b0 / k)
    return math.expm1(-(b0 + k * t1) * L) / math.expm1(-(b0 + k * t2) * L)


def limit_increment_law(regime: str, params: dict, t1: float, t2: float, j: int = 0):
    """Law of Z(t2) - Z(t1) given Z(t1) = j in the birth/Poisson limits.

    ``params`` holds ``w0``, ``k``, ``b0`` and, for q-regimes, ``c``.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if not (0 <= t1 < t2):
        raise ValueError(f"need 0 <= t1 < t2, got t1={t1}, t2={t2}")
    if j < 0:
        raise ValueError("j must be non-negative")
    k = int(params.get("k", 1))
    b0 = float(params["b0"])
    if regime == "polya-poisson":
        if b0 <= 0:
            raise ValueError("Poisson regime needs b0 > 0")
        return Poisson((t2 - t1) / b0)
    if regime == "q-poisson":
        if b0 <= 0:
            raise ValueError("Poisson regime needs b0 > 0")
        return Poisson((t2 - t1) * qpolya_poisson_rate(b0, float(params["c"])))
    nu = float(params["w0"]) / k + j
    if regime == "polya-birth":
        if b0 == 0 and t1 == 0:
            raise ValueError("b0 = 0 makes the rate infinite at t = 0")
        return NegativeBinomial(nu, (t1 + b0 / k) / (t2 + b0 / k))
    if b0 == 0 and t1 == 0:
        raise ValueError("b0 = 0 makes the rate infinite at t = 0")
    return NegativeBinomial(nu, q_birth_p(b0, k, float(params["c"]), t1, t2))

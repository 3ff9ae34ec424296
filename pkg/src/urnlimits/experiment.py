"""Convergence experiments: rescaled urn paths against their limit laws.

Each supported theorem id maps to a recipe that builds the urn for a given
``m``, simulates replicated runs and compares checkpoint marginals with the
limit.  Reports are deterministic functions of (config, seed); wall-clock
times are kept out of the serialized form so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dist, limitproc
from .rng import run_blocks
from .stats import EmpiricalLaw, chi_square, ks_statistic, moments, normal_cdf, tv_interval
from .urn import UrnConfig, simulate_draws

THEOREMS = {
    "1.1": "Polya urn, fixed white count: pure-birth limit with negative-binomial increments",
    "1.2": "Polya urn, sublinear white count: Poisson limit",
    "1.3": "Polya urn, linear counts: deterministic limit",
    "1.4": "Polya urn, linear counts: Gaussian fluctuation limit",
    "1.5": "q-Polya urn with q > 1: extinction law of the white draws",
    "1.6": "q-Polya urn, q = c^(1/m), fixed white count: pure-birth limit",
    "1.7": "q-Polya urn, q = c^(1/m), sublinear white count: Poisson limit",
    "1.8": "q-Polya urn, q = c^(1/m), linear counts: ODE limit",
    "1.9": "q-Polya urn, q = c^(1/m), linear counts: Gaussian fluctuation limit",
    "1.11": "l-color q-Polya urn with q < 1: joint extinction law of colors 2..l",
    "1.12": "l-color q-Polya urn, q = c^(1/m): ODE-system limit",
}


class HypothesisError(ValueError):
    """Parameters that violate the hypotheses of the requested theorem."""


@dataclass
class ExperimentReport:
    theorem: str
    params: dict
    m_grid: list
    replicates: int
    checkpoints: list
    seed: int
    cells: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    def add(self, m, t, metric, value):
        self.cells.append({"m": int(m), "t": t, "metric": metric, "value": float(value)})

    def value(self, metric, m=None, t=None) -> float:
        hits = [c["value"] for c in self.cells if c["metric"] == metric and (m is None or c["m"] == m) and (t is None or c["t"] == t)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match metric={metric!r}, m={m}, t={t}")
        return hits[0]

    def series(self, metric, t=None) -> list[tuple[int, float]]:
        return [(c["m"], c["value"]) for c in self.cells if c["metric"] == metric and (t is None or c["t"] == t)]

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "theorem": self.theorem,
            "description": THEOREMS[self.theorem],
            "params": self.params,
            "m_grid": self.m_grid,
            "replicates": self.replicates,
            "checkpoints": self.checkpoints,
            "seed": self.seed,
            "cells": self.cells,
        }
        if include_timing:
            d["timing"] = self.timing
        return d

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theorem", "m", "t", "metric", "value"])
        for c in self.cells:
            w.writerow([self.theorem, c["m"], _fmt_t(c["t"]), c["metric"], repr(c["value"])])
        return buf.getvalue()


def _fmt_t(t):
    return "" if t is None else repr(float(t)) if not isinstance(t, str) else t


def _parse_t(s):
    if s == "":
        return None
    try:
        return float(s)
    except ValueError:
        return s


def cells_from_csv(text: str) -> tuple[str, list]:
    rows = list(csv.DictReader(io.StringIO(text)))
    theorem = rows[0]["theorem"] if rows else ""
    cells = [{"m": int(r["m"]), "t": _parse_t(r["t"]), "metric": r["metric"], "value": float(r["value"])} for r in rows]
    return theorem, cells


# ---------------------------------------------------------------- recipes


def _floor(x: float) -> int:
    return int(math.floor(x + 1e-9))


def _gm(m: int, params: dict) -> int:
    g = params.get("g", "sqrt")
    if g == "sqrt":
        return math.ceil(math.sqrt(m))
    return _floor(m ** float(g))


def _need(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise HypothesisError(f"missing parameters: {', '.join(missing)}")


def _q_of(theorem: str, params: dict, m: int) -> float:
    if theorem in ("1.6", "1.7", "1.8", "1.9", "1.12"):
        return float(params["c"]) ** (1.0 / m)
    return float(params.get("q", 1.0))


def _setup(theorem: str, params: dict, m: int, checkpoints: list):
    """Urn configuration and the draw indices to record for one grid point."""
    k = int(params.get("k", 1))
    if theorem in ("1.1", "1.6"):
        _need(params, "w0", "b0")
        if theorem == "1.6" and not float(params["c"]) > 1:
            raise HypothesisError("theorem 1.6 needs c > 1")
        counts = (int(params["w0"]), _floor(float(params["b0"]) * m))
        ns = [_floor(m * t) for t in checkpoints]
    elif theorem in ("1.2", "1.7"):
        _need(params, "b0")
        if not float(params["b0"]) > 0:
            raise HypothesisError("the Poisson regime needs b0 > 0")
        if theorem == "1.7" and not float(params["c"]) > 1:
            raise HypothesisError("theorem 1.7 needs c > 1")
        g = _gm(m, params)
        counts = (g, _floor(float(params["b0"]) * m))
        ns = [_floor(t * m / g) for t in checkpoints]
    elif theorem in ("1.3", "1.8"):
        _need(params, "a", "b")
        if theorem == "1.8" and not (float(params["c"]) > 0 and float(params["c"]) != 1):
            raise HypothesisError("theorem 1.8 needs c > 0, c != 1")
        counts = (_floor(float(params["a"]) * m), _floor(float(params["b"]) * m))
        ns = [_floor(m * t) for t in checkpoints]
    elif theorem in ("1.4", "1.9"):
        _need(params, "a", "b")
        if theorem == "1.9" and not float(params["c"]) > 1:
            raise HypothesisError("theorem 1.9 needs c > 1")
        th1, th2 = float(params.get("theta1", 0.0)), float(params.get("theta2", 0.0))
        sm = math.sqrt(m)
        counts = (_floor(float(params["a"]) * m + th1 * sm), _floor(float(params["b"]) * m + th2 * sm))
        ns = [_floor(m * t) for t in checkpoints]
    elif theorem == "1.5":
        _need(params, "r", "s", "q")
        if not float(params["q"]) > 1:
            raise HypothesisError("theorem 1.5 needs q > 1")
        counts = (params["r"], int(params["s"]))
        ns = [m]
    elif theorem == "1.11":
        _need(params, "a", "q")
        if not 0 < float(params["q"]) < 1:
            raise HypothesisError("theorem 1.11 needs q in (0, 1)")
        counts = tuple(int(v) for v in params["a"])
        ns = [m]
    elif theorem == "1.12":
        _need(params, "a", "c")
        if not 0 < float(params["c"]) < 1:
            raise HypothesisError("theorem 1.12 needs c in (0, 1)")
        counts = tuple(_floor(float(v) * m) for v in params["a"])
        ns = [_floor(m * t) for t in checkpoints]
    else:
        raise HypothesisError(f"unsupported theorem id {theorem!r}; choose from {sorted(THEOREMS)}")
    if any(c == 0 for c in counts[:1]) and theorem in ("1.1", "1.2", "1.6", "1.7"):
        raise HypothesisError("the white count must be positive")
    try:
        config = UrnConfig(counts, k, _q_of(theorem, params, m))
    except ValueError as e:
        raise HypothesisError(str(e)) from e
    return config, ns


def _discrete_metrics(report, m, t, samples, law_obj, tol=1e-12):
    law = law_obj.to_pmf(tol) if hasattr(law_obj, "to_pmf") else law_obj
    emp = EmpiricalLaw.from_samples(samples)
    lo, hi = tv_interval(emp, law)
    chi, dof = chi_square(emp, law)
    mean, var = moments(samples)
    report.add(m, t, "tv", lo)
    report.add(m, t, "tv_upper", hi)
    report.add(m, t, "chi2", chi)
    report.add(m, t, "chi2_dof", dof)
    report.add(m, t, "mean", mean)
    report.add(m, t, "var", var)
    if isinstance(law_obj, (dist.NegativeBinomial, dist.Poisson)):
        report.add(m, t, "mean_gap", abs(mean - law_obj.mean))
        report.add(m, t, "var_gap", abs(var - law_obj.var))


def _gaussian_metrics(report, m, t, samples, mu, var_target):
    mean, var = moments(samples)
    sd = math.sqrt(var_target)
    report.add(m, t, "mean", mean)
    report.add(m, t, "var", var)
    report.add(m, t, "target_mean", mu)
    report.add(m, t, "target_var", var_target)
    report.add(m, t, "mean_gap_rel", abs(mean - mu) / max(abs(mu), sd))
    report.add(m, t, "var_gap_rel", abs(var / var_target - 1.0))
    report.add(m, t, "ks", ks_statistic(samples, normal_cdf(mu, var_target)))


def _limit_for(theorem, params, t):
    k = int(params.get("k", 1))
    if theorem == "1.1":
        return dist.limit_increment_law("polya-birth", params, 0.0, t)
    if theorem == "1.6":
        return dist.limit_increment_law("q-birth", params, 0.0, t)
    if theorem == "1.2":
        return dist.limit_increment_law("polya-poisson", params, 0.0, t)
    if theorem == "1.7":
        return dist.limit_increment_law("q-poisson", params, 0.0, t)
    if theorem == "1.3":
        return limitproc.polya_det_limit(float(params["a"]), float(params["b"]), k, t)
    if theorem == "1.8":
        return limitproc.qpolya_det_limit(float(params["a"]), float(params["b"]), k, float(params["c"]), t)
    if theorem == "1.12":
        return limitproc.multicolor_det_limit(params["a"], k, float(params["c"]), t)
    raise KeyError(theorem)


def _fluct_target(theorem, params, t):
    a, b, k = float(params["a"]), float(params["b"]), int(params.get("k", 1))
    th1, th2 = float(params.get("theta1", 0.0)), float(params.get("theta2", 0.0))
    if theorem == "1.4":
        mu, var = limitproc.polya_fluct_moments(a, b, k, th1, th2, t)
        return float(limitproc.polya_det_limit(a, b, k, t)), float(mu), float(var)
    c = float(params["c"])
    if t == 0:
        return a, th1, 0.0
    mu, var = limitproc.linear_sde_moments(limitproc.qpolya_fluct_spec(a, b, k, c, th1, th2), t)
    return float(limitproc.qpolya_det_limit(a, b, k, c, t)), mu, var


def run_convergence_experiment(
    theorem: str,
    params: dict,
    m_grid,
    replicates: int,
    checkpoints,
    seed: int,
    threads: int | None = None,
    progress: Callable[[str], None] | None = None,
) -> ExperimentReport:
    """Simulate ``replicates`` urns for every m, rescale, and score against the limit."""
    theorem = str(theorem)
    if theorem not in THEOREMS:
        raise HypothesisError(f"unsupported theorem id {theorem!r}; choose from {sorted(THEOREMS)}")
    m_grid = [int(m) for m in m_grid]
    checkpoints = [float(t) for t in checkpoints]
    if not m_grid or not checkpoints or replicates < 2:
        raise HypothesisError("m grid and checkpoints must be nonempty and replicates >= 2")
    if any(m < 1 for m in m_grid) or any(t < 0 for t in checkpoints) or checkpoints != sorted(checkpoints):
        raise HypothesisError("m must be positive and checkpoints sorted and non-negative")
    report = ExperimentReport(theorem, params, m_grid, int(replicates), checkpoints, int(seed))
    k = int(params.get("k", 1))
    for m in m_grid:
        t0 = time.perf_counter()
        config, ns = _setup(theorem, params, m, checkpoints)
        draws = run_blocks(lambda rng, size: simulate_draws(config, ns, size, rng), replicates, seed, key=(m,), threads=threads)
        counts = np.asarray(config.counts0, dtype=float) + k * draws
        if theorem in ("1.1", "1.2", "1.6", "1.7"):
            for j, t in enumerate(checkpoints):
                if t == 0:
                    continue
                _discrete_metrics(report, m, t, draws[:, j, 0], _limit_for(theorem, params, t))
        elif theorem == "1.5":
            law = dist.extinction_law(dist.UrnLawParams(params["r"], params["s"], k, params["q"]))
            _discrete_metrics(report, m, None, draws[:, 0, 0], law)
        elif theorem == "1.11":
            a = [int(v) for v in params["a"]]
            box = int(params.get("box", 60))
            law = dist.multicolor_limit_law(a, k, float(params["q"]), box)
            emp = EmpiricalLaw.from_samples(draws[:, 0, 1:])
            lo, hi = tv_interval(emp, law)
            report.add(m, None, "tv", lo)
            report.add(m, None, "tv_upper", hi)
        elif theorem in ("1.3", "1.8", "1.12"):
            gaps = np.zeros(replicates)
            for j, t in enumerate(checkpoints):
                target = np.asarray(_limit_for(theorem, params, t), dtype=float)
                if theorem == "1.12":
                    g = np.max(np.abs(counts[:, j, :] / m - target), axis=-1)
                else:
                    g = np.abs(counts[:, j, 0] / m - target)
                report.add(m, t, "gap_mean", float(g.mean()))
                gaps = np.maximum(gaps, g)
            band = float(params.get("band", 5.0)) / math.sqrt(m)
            report.add(m, None, "sup_gap_mean", float(gaps.mean()))
            report.add(m, None, "sup_gap_q95", float(np.quantile(gaps, 0.95)))
            report.add(m, None, "frac_within_band", float(np.mean(gaps < band)))
        else:  # 1.4, 1.9
            for j, t in enumerate(checkpoints):
                if t == 0:
                    continue
                x_t, mu, var = _fluct_target(theorem, params, t)
                c_t = math.sqrt(m) * (counts[:, j, 0] / m - x_t)
                _gaussian_metrics(report, m, t, c_t, mu, var)
        report.timing[str(m)] = time.perf_counter() - t0
        if progress:
            progress(f"theorem {theorem}: m={m} done in {report.timing[str(m)]:.2f}s")
    return report


# ---------------------------------------------------------------- threshold checks


@dataclass
class CheckResult:
    id: str
    description: str
    passed: bool
    detail: str
    soft: bool = False

    def as_dict(self) -> dict:
        return {"id": self.id, "description": self.description, "passed": self.passed, "detail": self.detail, "soft": self.soft}


def evaluate_checks(report: ExperimentReport, checks: list) -> list[CheckResult]:
    """Apply threshold checks to the matching report cells.

    A check names a ``metric`` and one of ``max`` / ``min`` (every matching
    cell must satisfy it) or ``decreasing: true`` (values strictly decrease
    along the m grid).  ``m`` and ``t`` restrict the cells considered.
    ``soft: true`` checks are reported but do not count as failures.
    """
    out = []
    for chk in checks:
        metric = chk["metric"]
        cells = [
            c
            for c in report.cells
            if c["metric"] == metric
            and ("m" not in chk or c["m"] == int(chk["m"]))
            and ("t" not in chk or c["t"] == chk["t"])
        ]
        desc = chk.get("description", metric)
        soft = bool(chk.get("soft", False))
        if not cells:
            out.append(CheckResult(str(chk["id"]), desc, False, f"no cells for metric {metric!r}", soft))
            continue
        if chk.get("decreasing"):
            by_t = {}
            for c in cells:
                by_t.setdefault(c["t"], []).append((c["m"], c["value"]))
            ok = True
            parts = []
            for t, seq in by_t.items():
                seq.sort()
                vals = [v for _, v in seq]
                ok &= all(x > y for x, y in zip(vals, vals[1:]))
                parts.append(", ".join(f"m={mm}: {v:.4g}" for mm, v in seq))
            out.append(CheckResult(str(chk["id"]), desc, ok, "; ".join(parts), soft))
            continue
        vals = [c["value"] for c in cells]
        ok = True
        bounds = []
        if "max" in chk:
            ok &= max(vals) < float(chk["max"])
            bounds.append(f"max {max(vals):.4g} < {chk['max']}")
        if "min" in chk:
            ok &= min(vals) >= float(chk["min"])
            bounds.append(f"min {min(vals):.4g} >= {chk['min']}")
        out.append(CheckResult(str(chk["id"]), desc, ok, "; ".join(bounds), soft))
    return out

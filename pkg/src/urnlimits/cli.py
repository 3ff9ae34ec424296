"""Command-line entry point: ``urnlimits {identities,pmf,simulate,limit,sde,verify}``.

Exit codes: 0 success, 1 threshold failure, 2 invalid input or config,
3 numeric guard tripped.  Data goes to stdout unless ``--out`` is given;
logs go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, dist, limitproc
from .config import ConfigError, bundled_configs, read_config, validate
from .experiment import THEOREMS, HypothesisError, evaluate_checks, run_convergence_experiment
from .identities import TOLERANCES, identity_sweep
from .limitproc import NumericGuardError
from .rng import default_threads, stream
from .urn import UrnConfig, simulate_path

LAWS = {
    "nb": "negative binomial NB(nu, p): --nu --p",
    "poisson": "Poisson(lam): --lam",
    "polya-transition": "Polya draw law over x = 0..n: --n --sigma --tau",
    "qpolya-transition": "q-Polya transition law over x = 0..n: --n --sigma --tau --rhat",
    "qpolya-draw": "white draws after n draws of the q-Polya urn: --r --s --k --q --n (r may be inf)",
    "extinction": "total white draws of the q > 1 urn: --r --s --k --q",
    "multicolor": "draws of colors 2..l after n draws: --a --k --q --n",
    "multicolor-limit": "total draws of colors 2..l, q < 1: --a --k --q --box",
}


class UsageError(ValueError):
    pass


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _counts(text: str) -> list:
    return [v if v == "inf" else int(v) for v in text.split(",")]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- identities


def cmd_identities(args) -> int:
    res = identity_sweep(points=args.points, seed=args.seed)
    rows = [[name, _num(v), _num(TOLERANCES[name]), str(v < TOLERANCES[name]).lower()] for name, v in res.items()]
    _emit(_csv(["identity", "max_residual", "tolerance", "passed"], rows), args.out)
    return 0 if all(res[n] < TOLERANCES[n] for n in res) else 1


# ---------------------------------------------------------------- pmf


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"law {args.law!r} needs --{', --'.join(missing)}")


def law_pmf(args) -> dist.Pmf:
    law = args.law
    if law == "nb":
        _require(args, "nu", "p")
        nb = dist.NegativeBinomial(args.nu, args.p)
        return _clip(nb.to_pmf(args.tol), args.max_x, nb.sf)
    if law == "poisson":
        _require(args, "lam")
        po = dist.Poisson(args.lam)
        return _clip(po.to_pmf(args.tol), args.max_x, po.sf)
    if law in ("polya-transition", "qpolya-transition"):
        _require(args, "n", "sigma", "tau")
        xs = np.arange(args.n + 1)
        if law == "polya-transition":
            ps = [dist.polya_transition_pmf(args.n, int(x), args.sigma, args.tau) for x in xs]
        else:
            _require(args, "rhat")
            ps = [dist.qpolya_transition_pmf(args.n, int(x), args.sigma, args.tau, args.rhat) for x in xs]
        return dist.Pmf(xs, np.array(ps))
    if law == "qpolya-draw":
        _require(args, "r", "s", "k", "q", "n")
        return dist.qpolya_draw_law(dist.UrnLawParams(args.r, args.s, args.k, args.q), args.n)
    if law == "extinction":
        _require(args, "r", "s", "k", "q")
        return dist.extinction_law(dist.UrnLawParams(args.r, args.s, args.k, args.q), tol=args.tol, max_x=args.max_x)
    if law == "multicolor":
        _require(args, "a", "k", "q", "n")
        return dist.multicolor_law(_ints(args.a), args.k, args.q, args.n)
    if law == "multicolor-limit":
        _require(args, "a", "k", "q")
        return dist.multicolor_limit_law(_ints(args.a), args.k, args.q, args.box)
    raise UsageError(f"unknown law {law!r}")


def _clip(pmf: dist.Pmf, max_x, sf) -> dist.Pmf:
    if max_x is None or max_x >= pmf.support[-1]:
        return pmf
    keep = pmf.support <= max_x
    return dist.Pmf(pmf.support[keep], pmf.probs[keep], truncation_mass=float(sf(max_x)), meta=pmf.meta)


def cmd_pmf(args) -> int:
    if args.r is not None and args.r != "inf":
        args.r = int(args.r)
    pmf = law_pmf(args)
    sup = np.asarray(pmf.support)
    if args.format == "json":
        doc = {
            "law": args.law,
            "support": sup.tolist(),
            "probs": [float(p) for p in pmf.probs],
            "sum": float(np.sum(pmf.probs)),
            "truncation_mass": float(pmf.truncation_mass),
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
        return 0
    if sup.ndim == 1:
        header = ["x", "prob"]
        rows = [[_num(x), _num(p)] for x, p in zip(sup, pmf.probs)]
    else:
        header = [f"x{i + 2}" for i in range(sup.shape[1])] + ["prob"]
        rows = [[_num(v) for v in x] + [_num(p)] for x, p in zip(sup, pmf.probs)]
    text = _csv(header, rows) + f"# sum={_num(float(np.sum(pmf.probs)))},truncation_mass={_num(float(pmf.truncation_mass))}\n"
    _emit(text, args.out)
    return 0


# ---------------------------------------------------------------- simulate


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    if args.out is not None:
        raise UsageError("--seed is required when writing to a file")
    seed = int(np.random.SeedSequence().entropy % (2**63))
    _log(f"seed={seed}")
    return seed


def cmd_simulate(args) -> int:
    seed = _seed(args)
    config = UrnConfig(_counts(args.counts), args.k, args.q)
    stride = args.stride or args.horizon
    path = simulate_path(config, args.horizon, stride, stream(seed))
    l = config.colors
    total0 = sum(config.counts0)
    header = ["n"] + [f"count{i + 1}" for i in range(l)] + ["total", "conserved"]
    rows = []
    for n, v in zip(path.times, path.values):
        total = float(np.sum(v))
        expected = total0 + config.k * int(n)
        rows.append([str(int(n))] + [_num(int(x)) if math.isfinite(x) else "inf" for x in v]
                    + [_num(int(total)) if math.isfinite(total) else "inf", str(total == expected).lower()])
    _emit(_csv(header, rows), args.out)
    return 0


# ---------------------------------------------------------------- limit


def cmd_limit(args) -> int:
    if args.process == "det":
        t = np.round(np.arange(0.0, args.t_max + 0.5 * args.dt, args.dt), 12)
        if args.family == "polya":
            cols = [limitproc.polya_det_limit(args.a, args.b, args.k, t)]
        elif args.family == "q-polya":
            cols = [limitproc.qpolya_det_limit(args.a, args.b, args.k, args.c, t)]
        else:
            if args.colors is None:
                raise UsageError("--colors is required for the multicolor family")
            x = np.array([limitproc.multicolor_det_limit(_floats(args.colors), args.k, args.c, s, regime=args.regime) for s in t])
            cols = list(x.T)
        header = ["t"] + (["x"] if len(cols) == 1 else [f"x{i + 1}" for i in range(len(cols))])
        rows = [[_num(s)] + [_num(c[i]) for c in cols] for i, s in enumerate(t)]
        _emit(_csv(header, rows), args.out)
        return 0
    seed = _seed(args)
    rng = stream(seed)
    if args.process == "birth":
        spec = limitproc.BirthRateSpec(args.family, args.w0, args.k, args.b0, args.c)
        events = limitproc.birth_sample_events(spec, args.t_max, rng)
    else:
        rate = 1.0 / args.b0 if args.family == "polya" else limitproc.qpolya_rate(args.b0, args.c)
        events = limitproc.poisson_sample(rate, args.t_max, rng)
    rows = [[str(i + 1), _num(e)] for i, e in enumerate(events)]
    _emit(_csv(["jump", "time"], rows), args.out)
    return 0


# ---------------------------------------------------------------- sde


def cmd_sde(args) -> int:
    seed = _seed(args)
    n = int(round(args.t_max / args.dt))
    dw = limitproc.brownian_increments(n, args.dt, stream(seed))
    if args.family == "polya":
        spec = limitproc.polya_fluct_spec(args.a, args.b, args.k, args.theta1, args.theta2)
        closed = limitproc.polya_fluct_solution(args.a, args.b, args.k, args.theta1, args.theta2, args.dt, dw)
    else:
        spec = limitproc.qpolya_fluct_spec(args.a, args.b, args.k, args.c, args.theta1, args.theta2)
        closed = limitproc.qpolya_fluct_solution(args.a, args.b, args.k, args.c, args.theta1, args.theta2, args.dt, dw)
    em = limitproc.euler_maruyama(spec, args.dt, dw)
    step = max(1, args.every)
    idx = list(range(0, n + 1, step))
    if idx[-1] != n:
        idx.append(n)
    rows = [[_num(closed.times[i]), _num(em.values[i]), _num(closed.values[i]), _num(abs(em.values[i] - closed.values[i]))] for i in idx]
    _emit(_csv(["t", "euler_maruyama", "closed_form", "gap"], rows), args.out)
    _log(f"max gap {np.max(np.abs(em.values - closed.values)):.3e}")
    return 0


# ---------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    if args.list:
        for name in bundled_configs():
            cfg = read_config(name)
            print(f"{name}: theorem {cfg['theorem']} ({THEOREMS[cfg['theorem']]})")
        return 0
    if args.config is None:
        raise UsageError("verify needs a config file (or --list)")
    cfg = read_config(args.config)
    for key in ("seed", "replicates"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.m_grid is not None:
        cfg["m_grid"] = _ints(args.m_grid)
    validate(cfg, args.config)
    if args.dry_run:
        _log(f"{args.config}: valid (theorem {cfg['theorem']}, m grid {cfg['m_grid']}, {cfg['replicates']} replicates)")
        return 0
    threads = args.threads if args.threads is not None else default_threads()
    report = run_convergence_experiment(
        cfg["theorem"], cfg["params"], cfg["m_grid"], cfg["replicates"], cfg["checkpoints"], cfg["seed"],
        threads=threads, progress=_log,
    )
    results = evaluate_checks(report, cfg.get("checks", []))
    doc = report.to_dict()
    doc["checks"] = [r.as_dict() for r in results]
    out = cfg.get("output", {})
    json_path, csv_path = out.get("json"), out.get("csv")
    if args.out is not None:
        json_path, csv_path = f"{args.out}.json", f"{args.out}.csv"
    if json_path is None:
        stem = Path(args.config).stem
        json_path, csv_path = f"report_{stem}.json", f"report_{stem}.csv"
    if args.out_dir is not None:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        json_path = str(Path(args.out_dir) / Path(json_path).name)
        csv_path = str(Path(args.out_dir) / Path(csv_path).name)
    _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", json_path)
    _emit(report.to_csv(), csv_path)
    print(f"{'criterion':<10} {'result':<6} detail")
    for r in results:
        verdict = ("PASS" if r.passed else "FAIL") + ("*" if r.soft else "")
        print(f"{r.id:<10} {verdict:<6} {r.description}: {r.detail}")
    if any(r.soft for r in results):
        print("* soft check, reported only")
    _log(f"wrote {json_path} and {csv_path}; wall time {sum(report.timing.values()):.1f}s")
    return 0 if all(r.passed or r.soft for r in results) else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    laws = "\n".join(f"  {k:<18} {v}" for k, v in LAWS.items())
    thms = "\n".join(f"  {k:<5} {v}" for k, v in THEOREMS.items())
    p = argparse.ArgumentParser(
        prog="urnlimits",
        description="Polya and q-Polya urns: exact laws, simulation, limit processes and convergence checks.",
        epilog=f"laws (pmf):\n{laws}\n\ntheorem ids (verify):\n{thms}\n\n"
        "exit codes: 0 ok, 1 threshold failure, 2 invalid input, 3 numeric guard",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("identities", help="residuals of the q-binomial identities")
    s.add_argument("--points", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_identities)

    s = sub.add_parser("pmf", help="tabulate an exact law", epilog=f"laws:\n{laws}", formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("law", choices=sorted(LAWS))
    for name in ("nu", "p", "lam", "sigma", "tau", "rhat", "q"):
        s.add_argument(f"--{name}", type=float)
    for name in ("n", "s", "k"):
        s.add_argument(f"--{name}", type=int)
    s.add_argument("--r", help="initial white count (integer or inf)")
    s.add_argument("--a", help="comma-separated initial counts for multicolor laws")
    s.add_argument("--box", type=int, default=60, help="per-color cutoff for multicolor-limit")
    s.add_argument("--max-x", type=int, help="largest x to tabulate for infinite-support laws")
    s.add_argument("--tol", type=float, default=1e-12, help="tail mass allowed when truncating")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_pmf)

    s = sub.add_parser("simulate", help="simulate one urn path")
    s.add_argument("--counts", required=True, help="comma-separated initial counts; color 1 may be inf")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--q", type=float, default=1.0)
    s.add_argument("--horizon", type=int, required=True, help="number of draws")
    s.add_argument("--stride", type=int, help="record every STRIDE draws (default: only start and end)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("limit", help="deterministic limits or one path of a birth/Poisson limit")
    s.add_argument("process", choices=["det", "birth", "poisson"])
    s.add_argument("--family", choices=["polya", "q-polya", "multicolor"], default="polya")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--colors", help="comma-separated a_i for the multicolor family")
    s.add_argument("--regime", type=int, choices=[1, 2], default=1)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--c", type=float)
    s.add_argument("--w0", type=int, default=1)
    s.add_argument("--b0", type=float, default=1.0)
    s.add_argument("--t-max", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("sde", help="fluctuation SDE: Euler-Maruyama next to the closed form, shared noise")
    s.add_argument("--family", choices=["polya", "q-polya"], default="polya")
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--c", type=float, default=2.0)
    s.add_argument("--theta1", type=float, default=0.0)
    s.add_argument("--theta2", type=float, default=0.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-max", type=float, default=1.0)
    s.add_argument("--every", type=int, default=100, help="output every EVERY grid points")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sde)

    s = sub.add_parser("verify", help="run a convergence experiment from a config file", epilog=f"theorem ids:\n{thms}",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("config", nargs="?", help="config path or bundled config name (see --list)")
    s.add_argument("--list", action="store_true", help="list bundled configs")
    s.add_argument("--dry-run", action="store_true", help="validate the config without simulating")
    s.add_argument("--threads", type=int, help="replicate worker threads (default: URNLIMITS_THREADS or 1)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--replicates", type=int, help="override the replicate count")
    s.add_argument("--m-grid", help="override the m grid, comma-separated")
    s.add_argument("--out", help="report path prefix; writes PREFIX.json and PREFIX.csv")
    s.add_argument("--out-dir", help="directory for the report files")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericGuardError as e:
        _log(f"numeric guard: {e}")
        return 3
    except (UsageError, ConfigError, HypothesisError, ValueError, OverflowError) as e:
        _log(f"error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())

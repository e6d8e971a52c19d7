"""Command-line front end.

Precedence: explicit flags > values from ``--config`` > built-in defaults.
Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional

from . import acceptance, harness, poisson, wishart
from .config import ConfigError, ExperimentConfig, emit_report, load_config, render_report
from .ensembles import EnsembleSpec, InvalidSpec
from .numerics import QuadratureError

DEFAULT_REPLICAS = {"estimate": 10_000, "compare": 100_000, "poisson": 10_000, "tail": 10_000}


def _z_arg(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return parts
    raise argparse.ArgumentTypeError("z is 're' or 're,im'")


def _floats(text: str):
    return [float(p) for p in text.split(",") if p]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heavytail-rmt",
                                 description="Cross-checked spectral statistics of heavy-tailed random matrices.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config (or an earlier report) to start from")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, help=f"worker threads (env {harness.THREADS_ENV})")
        p.add_argument("--out", dest="output", help="write the report here (atomically)")
        p.add_argument("--format", choices=("json", "csv"))

    def ensemble(p):
        p.add_argument("--kind")
        p.add_argument("--m", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--b", type=int)
        p.add_argument("--relaxed", dest="bernoulli_relaxed", action="store_const", const=True)
        p.add_argument("--t", type=float)
        p.add_argument("--z", type=_z_arg)
        p.add_argument("--ts", type=_floats)
        p.add_argument("--power", type=float)
        p.add_argument("--regime")
        p.add_argument("--g", help="characteristic function id for general_r_dual")
        p.add_argument("--G", help="radial density id for complex_dual")
        p.add_argument("--cutoff", type=float)
        p.add_argument("--x", type=float)
        p.add_argument("--replicas", type=int)

    p = sub.add_parser("estimate", help="run one estimator route")
    common(p)
    ensemble(p)
    p.add_argument("--route", choices=harness.route_names())

    p = sub.add_parser("compare", help="two routes, or a route against a closed form")
    common(p)
    ensemble(p)
    p.add_argument("--route", choices=harness.route_names())
    p.add_argument("--route-b", dest="route_b", choices=harness.route_names())
    p.add_argument("--reference", help="number, or one of: limit, wishart_real, wishart_complex, "
                                       "poisson, rademacher_bruteforce")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("poisson", help="simulate the limiting point process")
    common(p)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--z", type=_z_arg)
    p.add_argument("--replicas", type=int)
    p.add_argument("--points", action="store_true", help="emit the sampled points as CSV")

    p = sub.add_parser("tail", help="empirical tail of an extreme statistic")
    common(p)
    p.add_argument("--statistic", choices=[s.value for s in harness.TailStatistic])
    p.add_argument("--x-grid", dest="x_grid", type=_floats)
    p.add_argument("--kind")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("wishart", help="Gaussian-ensemble closed forms")
    common(p)
    p.add_argument("--op", choices=("real", "complex", "saddle", "steepest_descent", "mp_log",
                                    "mp_density", "mp_normalization", "bessel_kernel"))
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--scaled", action="store_const", const=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--alpha", type=float)

    p = sub.add_parser("lemma1", help="real/complex Gaussian determinant identity")
    common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--z", type=float)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("verify-all", help="run the full acceptance suite")
    common(p)
    p.add_argument("--only", type=lambda s: s.split(","), help="comma-separated criterion keys")
    return ap


TOP_LEVEL = ("seed", "threads", "output", "format", "replicas", "route", "route_b",
             "reference", "threshold")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Merge ``--config`` with flags; flags win."""
    cfg = load_config(args.config) if args.config else ExperimentConfig(subcommand=args.subcommand)
    if cfg.subcommand != args.subcommand:
        raise ConfigError(f"{args.config}: config is for {cfg.subcommand!r}, not {args.subcommand!r}")
    skip = {"config", "subcommand", "points"} | set(TOP_LEVEL)
    params = dict(cfg.params)
    for k, v in vars(args).items():
        if v is None or k in skip:
            continue
        params[k] = v
    cfg.params = params
    for k in TOP_LEVEL:
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


def _spec_from(params: dict, seed: int) -> EnsembleSpec:
    return EnsembleSpec(kind=params.get("kind", "cauchy_full"), m=int(params["m"]),
                        n=int(params["n"]), b=params.get("b"),
                        bernoulli_relaxed=bool(params.get("bernoulli_relaxed", False)), seed=seed)


def _require(params: dict, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"params: missing {', '.join(missing)}")


def _closed_form(name: str, p: dict) -> float | complex:
    """Reference values a route can be compared against."""
    if name == "limit":
        z = harness._shift(p)
        return poisson.poisson_det_expectation(z) if z != 0 else 1.0
    if name == "poisson":
        return poisson.poisson_det_expectation(harness._shift(p))
    if name == "wishart_real":
        return wishart.wishart_real_det_integral(int(p["n"]), int(p["m"]), float(p["t"])).value
    if name == "wishart_complex":
        return wishart.wishart_complex_det_integral(int(p["n"]), int(p["m"]), float(p["t"])).value
    if name == "rademacher_bruteforce":
        from .dual import rademacher_bruteforce
        return rademacher_bruteforce(int(p["n"]), float(p["t"]))
    try:
        return complex(name) if "j" in name else float(name)
    except ValueError:
        raise ConfigError(f"reference: unknown closed form {name!r}") from None


def _run(cfg: ExperimentConfig, args, out) -> tuple[int, object, str]:
    """Execute; returns (exit code, JSON-able results, csv text or '')."""
    p = cfg.params
    sc = cfg.subcommand
    reps = cfg.replicas or DEFAULT_REPLICAS.get(sc)

    if sc == "estimate":
        if not cfg.route:
            raise ConfigError("route: required for estimate")
        est = harness.run_estimator(cfg.route, p, reps, cfg.seed, cfg.threads)
        return 0, est.to_dict(), ""

    if sc == "compare":
        if not cfg.route:
            raise ConfigError("route: required for compare")
        a = harness.run_estimator(cfg.route, p, reps, cfg.seed, cfg.threads)
        if cfg.route_b:
            b = harness.run_estimator(cfg.route_b, cfg.params_b or p, reps, cfg.seed, cfg.threads)
        elif cfg.reference is not None:
            b = _closed_form(str(cfg.reference), p)
        else:
            raise ConfigError("compare needs route_b or reference")
        rep = harness.compare(a, b, cfg.threshold)
        return (0 if rep.passed else 1), rep.to_dict(), ""

    if sc == "poisson":
        cutoff = float(p.get("cutoff", poisson.DEFAULT_CUTOFF))
        if getattr(args, "points", False):
            from .rng import StreamBlock
            import numpy as np
            samples = poisson.sample_process_block(StreamBlock(cfg.seed, np.arange(reps), "poisson"), cutoff)
            return 0, None, poisson.samples_to_csv(samples)
        z = p.get("z", 1.0)
        est = harness.run_estimator("poisson_det", {"z": z, "cutoff": cutoff}, reps, cfg.seed, cfg.threads)
        exact = poisson.poisson_det_expectation(harness._shift({"z": z}))
        rep = harness.compare(est, exact, cfg.threshold)
        return 0, {"estimate": est.to_dict(), "exact": [exact.real, exact.imag],
                   "truncation_correction": poisson.truncation_correction(harness._shift({"z": z}), cutoff),
                   "z_score": rep.z_score}, ""

    if sc == "tail":
        stat = harness.TailStatistic(p.get("statistic", "lambda1"))
        tc = harness.TailStudyConfig(x_grid=tuple(p.get("x_grid", (1.0, 4.0, 16.0, 64.0))),
                                     replicas=reps, statistic=stat, seed=cfg.seed,
                                     delta=float(p.get("delta", 1.0)),
                                     cutoff=float(p.get("cutoff", poisson.DEFAULT_CUTOFF)))
        spec = None if stat is harness.TailStatistic.POISSON_MAX else _spec_from(p, cfg.seed)
        st = harness.tail_study(tc, spec, cfg.threads)
        slope, se = st.tail_slope() if len(st.rows) > 1 else (math.nan, math.nan)
        res = {"rows": [r.__dict__ for r in st.rows], "sup_C": st.sup_C,
               "tail_slope": slope, "tail_slope_stderr": se}
        if st.count_above_delta is not None:
            res["count_above_delta"] = st.count_above_delta.to_dict()
        return 0, res, st.to_csv()

    if sc == "wishart":
        return 0, _wishart(p), ""

    if sc == "lemma1":
        tol = float(p.get("tol", 1e-10))
        if "m" in p or "n" in p or "z" in p:
            _require(p, "m", "n", "z")
            grid = [(int(p["m"]), int(p["n"]), float(p["z"]))]
        else:
            grid = [(m, n, z) for m in range(1, 7) for n in range(1, m + 1) for z in (0.1, 1.0, 10.0)]
        rows = [{"m": m, "n": n, "z": z, "residual": wishart.lemma1_residual(m, n, z)} for m, n, z in grid]
        worst = max(r["residual"] for r in rows)
        return (0 if worst < tol else 1), {"rows": rows, "max_residual": worst, "tol": tol}, ""

    if sc == "verify-all":
        only = p.get("only")
        results = acceptance.run_all(seed=cfg.seed or acceptance.DEFAULT_SEED, threads=cfg.threads,
                                     only=only, echo=lambda s: print(s, file=out, flush=True))
        ok = all(r.ok for r in results)
        return (0 if ok else 1), [r.to_dict() for r in results], ""

    raise ConfigError(f"subcommand: {sc!r}")  # pragma: no cover


def _wishart(p: dict) -> dict:
    op = p.get("op", "real")
    echo = {k: v for k, v in p.items()}
    if op in ("real", "complex"):
        _require(p, "n", "m", "t")
        fn = wishart.wishart_real_det_integral if op == "real" else wishart.wishart_complex_det_integral
        q = fn(int(p["n"]), int(p["m"]), float(p["t"]), bool(p.get("scaled", False)))
        return {"value": q.value, "err_bound": q.err_bound, "log_value": q.log_value, "params": echo}
    if op == "saddle":
        _require(p, "t")
        sd = wishart.saddle(float(p["t"]))
        return {"value": sd.z_star, "err_bound": 0.0, "second_deriv": sd.second_deriv, "params": echo}
    if op == "steepest_descent":
        _require(p, "n", "t")
        lv = wishart.steepest_descent_log(int(p["n"]), float(p["t"]))
        return {"value": math.exp(lv), "log_value": lv, "err_bound": None, "params": echo}
    mp = wishart.MPParams(float(p.get("gamma", 1.0)), float(p.get("sigma2", 1.0)))
    if op == "mp_log":
        _require(p, "t")
        q = wishart.mp_log_integral(float(p["t"]), mp)
        return {"value": q.value, "err_bound": q.err_bound, "params": echo}
    if op == "mp_normalization":
        q = wishart.mp_normalization(mp)
        return {"value": q.value, "err_bound": q.err_bound, "params": echo}
    if op == "mp_density":
        _require(p, "x")
        return {"value": wishart.mp_density(float(p["x"]), mp), "err_bound": 0.0, "params": echo}
    if op == "bessel_kernel":
        _require(p, "x", "y")
        v = wishart.bessel_kernel(float(p["x"]), float(p["y"]), float(p.get("alpha", 0.0)))
        return {"value": v, "err_bound": None, "params": echo}
    raise ConfigError(f"params.op: unknown operation {op!r}")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:           # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    out = sys.stdout
    try:
        cfg = config_from_args(args)
        code, results, table = _run(cfg, args, out)
        want_csv = cfg.format == "csv" and table
        if cfg.output:
            if want_csv:
                emit_report(table, cfg.output, "csv", cfg)
            else:
                emit_report(results, cfg.output, "json", cfg)
        if table and (want_csv or results is None):
            out.write(render_report(table, cfg, "csv"))
        else:
            out.write(json.dumps(results, indent=2, default=_jsonable) + "\n")
        return code
    except (ConfigError, InvalidSpec, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, harness.RouteError, FloatingPointError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    return str(o)


if __name__ == "__main__":
    sys.exit(main())

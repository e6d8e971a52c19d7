"""Reproducible Monte Carlo engine.

Replica ``i`` of a run always draws from substream ``(seed, i, tag)``.  Work
is cut into chunks whose size depends only on the route parameters, chunks
may run on any number of threads, and per-chunk statistics are merged in
chunk order.  The resulting :class:`Estimate` is therefore bit-identical for
every thread count.
"""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import dual, poisson
from .ensembles import EnsembleSpec, Kind, draw_entries, sample_sparse_mask
from .rng import RngStream, StreamBlock
from .spectra import Regime, ShiftParam, log_det_functional, singular_values_squared, spectrum_scale

THREADS_ENV = "HEAVYTAIL_RMT_THREADS"
# doubles a chunk may hold at once; chunking never depends on the thread count
CHUNK_BUDGET = 2**21
MAX_CHUNK = 4096


class RouteError(RuntimeError):
    """A route raised while computing the value of a specific replica."""

    def __init__(self, route: str, replica: int, cause: BaseException):
        super().__init__(f"route {route!r} failed at replica {replica}: {cause}")
        self.route = route
        self.replica = replica
        self.__cause__ = cause


@dataclass(frozen=True)
class Estimate:
    mean: complex
    stderr: float
    replicas: int
    seed: int
    route: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        mean = complex(self.mean)
        return {"route": self.route, "params": _jsonable(self.params),
                "mean_re": mean.real, "mean_im": mean.imag,
                "stderr": self.stderr, "replicas": self.replicas, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        return cls(mean=complex(d["mean_re"], d["mean_im"]), stderr=float(d["stderr"]),
                   replicas=int(d["replicas"]), seed=int(d["seed"]), route=d["route"],
                   params=dict(d.get("params", {})))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass(frozen=True)
class ComparisonReport:
    estimate_a: Estimate
    estimate_b: Estimate | float | complex
    z_score: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return self.z_score <= self.threshold

    def to_dict(self) -> dict:
        b = self.estimate_b
        b_out = b.to_dict() if isinstance(b, Estimate) else {"reference": _jsonable(complex(b))}
        return {"estimate_a": self.estimate_a.to_dict(), "estimate_b": b_out,
                "z_score": self.z_score, "threshold": self.threshold, "pass": self.passed}


def z_score(a: Estimate, b: Estimate | float | complex) -> float:
    """|mean_a - mean_b| / sqrt(stderr_a^2 + stderr_b^2); a reference value has stderr 0."""
    mb, sb = (b.mean, b.stderr) if isinstance(b, Estimate) else (complex(b), 0.0)
    diff = abs(complex(a.mean) - complex(mb))
    scale = math.hypot(a.stderr, sb)
    if scale == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / scale


def compare(a: Estimate, b: Estimate | float | complex, threshold: float = 3.0) -> ComparisonReport:
    return ComparisonReport(a, b, z_score(a, b), threshold)


# -- parameter helpers --------------------------------------------------------

def _shift(params: dict) -> complex:
    """z from ``params["z"]`` (number or [re, im]) or from ``params["t"]`` as t^2."""
    if "z" in params:
        z = params["z"]
        z = complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z)
        return ShiftParam(z).z
    t = float(params["t"])
    if t < 0:
        raise ValueError("t must be non-negative")
    return complex(t * t)


def _spec(params: dict, seed: int) -> EnsembleSpec:
    return EnsembleSpec(kind=Kind(params.get("kind", "cauchy_full")), m=int(params["m"]),
                        n=int(params["n"]), b=params.get("b"),
                        bernoulli_relaxed=bool(params.get("bernoulli_relaxed", False)), seed=seed)


def fixed_mask(spec: EnsembleSpec) -> np.ndarray:
    """The sparse mask shared by every replica of a run, from substream (seed, 0, "mask")."""
    return sample_sparse_mask(spec.m, spec.n, spec.b, spec.bernoulli_relaxed,
                              RngStream(spec.seed, 0, "mask"))


def _default_regime(kind: Kind) -> Regime:
    return Regime.EXTREME if kind in (Kind.CAUCHY_FULL, Kind.CAUCHY_SPARSE) else Regime.RAW


def _spectra(block: StreamBlock, spec: EnsembleSpec, ctx: dict, regime: Regime):
    a = draw_entries(spec.kind, spec.m, spec.n, block)
    if spec.kind is Kind.CAUCHY_SPARSE:
        a = np.where(ctx["mask"], a, 0.0)
    return a, singular_values_squared(a) / spectrum_scale(spec, regime)


# -- routes ------------------------------------------------------------------

@dataclass(frozen=True)
class RouteDef:
    """``values(block, params, ctx)`` returns shape (R,) or (R, k); ``prepare`` builds ctx once per run."""

    name: str
    values: Callable
    cost: Callable[[dict], float]
    prepare: Optional[Callable] = None
    columns: tuple = ("value",)


def _prepare_spec(params, seed):
    spec = _spec(params, seed)
    ctx = {"spec": spec}
    if spec.kind is Kind.CAUCHY_SPARSE:
        ctx["mask"] = fixed_mask(spec)
    return ctx


def _direct(block, params, ctx):
    spec = ctx["spec"]
    regime = Regime(params.get("regime", _default_regime(spec.kind)))
    power = float(params.get("power", 1.0 if spec.kind is Kind.WISHART_COMPLEX else 0.5))
    _, lam = _spectra(block, spec, ctx, regime)
    if "ts" in params:
        zs = [complex(float(t) ** 2) for t in params["ts"]]
    else:
        zs = [_shift(params)]
    logs = sum(log_det_functional(lam, z, power) if z != 0 else 0.0 for z in zs)
    return np.exp(np.broadcast_to(logs, (len(block),)))


def _sparse_dual(block, params, ctx):
    spec = ctx["spec"]
    return dual.cauchy_dual_sparse_values(block, ctx["mask"], float(params["t"]), b=spec.b)


def _poisson(block, params, ctx):
    z = _shift(params)
    cutoff = float(params.get("cutoff", poisson.DEFAULT_CUTOFF))
    vals = np.exp(poisson.process_log_det_values(block, cutoff, z))
    corr = poisson.truncation_correction(z, cutoff) if params.get("correct", True) else 1.0
    return vals * (corr.real if complex(corr).imag == 0 and np.isrealobj(vals) else corr)


def _corollary1(block, params, ctx):
    spec = ctx["spec"]
    z = _shift(params)
    zz = z.real if z.imag == 0 else z
    _, lam = _spectra(block, spec, ctx, Regime(params.get("regime", Regime.EXTREME)))
    det = np.exp(log_det_functional(lam, z, 0.5))
    r = lam / (1.0 + zz * lam)
    s1 = r.sum(axis=1)
    s2 = (r * r).sum(axis=1)
    return np.stack([det * s1, det * (s1 * s1 + 2.0 * s2), det * (s1 * s1 + s2)], axis=1)


def _max_entry(block, params, ctx):
    m, n = int(params["m"]), int(params["n"])
    a = draw_entries(Kind.CAUCHY_FULL, m, n, block)
    mx = np.abs(a).reshape(len(block), -1).max(axis=1) / (n * m)
    return (mx <= float(params["x"])).astype(float)


def _extremes(block, params, ctx):
    """Per matrix: largest rescaled eigenvalue, count of those >= delta, max |a| / (n m)."""
    spec = ctx["spec"]
    a, lam = _spectra(block, spec, ctx, Regime.EXTREME)
    delta = float(params.get("delta", 1.0))
    mx = np.abs(a).reshape(len(block), -1).max(axis=1) / (spec.n * spec.m)
    return np.stack([lam[:, 0], (lam >= delta).sum(axis=1).astype(float), mx], axis=1)


def _poisson_max(block, params, ctx):
    return poisson.max_point_values(block, float(params.get("cutoff", poisson.DEFAULT_CUTOFF)))[:, None]


def _mn(p):
    return float(p["m"]) * float(p["n"])


ROUTES: dict[str, RouteDef] = {}


def register(route: RouteDef) -> None:
    ROUTES[route.name] = route


for _r in (
    RouteDef("constant", lambda blk, p, c: np.full(len(blk), float(p.get("value", 0.5))), lambda p: 1),
    RouteDef("direct", _direct, lambda p: 3 * _mn(p) * (2 if p.get("kind") == "wishart_complex" else 1),
             _prepare_spec),
    RouteDef("cauchy_dual", lambda blk, p, c: dual.cauchy_dual_values(
        blk, int(p["m"]), int(p["n"]), float(p["t"])), lambda p: 2 * float(p["n"])),
    RouteDef("cauchy_dual_sparse", _sparse_dual, lambda p: 2 * float(p["n"]) + _mn(p),
             lambda p, s: _prepare_spec({**p, "kind": "cauchy_sparse"}, s)),
    RouteDef("general_r_dual", lambda blk, p, c: dual.general_r_dual_values(
        blk, int(p["m"]), int(p["n"]), p["ts"], p.get("g", "cauchy")),
        lambda p: 3 * _mn(p) * len(p["ts"])),
    RouteDef("complex_dual", lambda blk, p, c: dual.complex_dual_values(
        blk, int(p["m"]), int(p["n"]), float(p["t"]), p.get("G", "wishart_radial")),
        lambda p: 3 * _mn(p)),
    RouteDef("rademacher_dual", lambda blk, p, c: dual.rademacher_dual_values(
        blk, int(p["n"]), float(p["t"])), lambda p: 3 * float(p["n"]) ** 2),
    RouteDef("poisson_det", _poisson, lambda p: 3 * poisson.tail_mass(
        float(p.get("cutoff", poisson.DEFAULT_CUTOFF))) + 2),
    RouteDef("corollary1", _corollary1, lambda p: 3 * _mn(p), _prepare_spec,
             columns=("first", "second", "literal")),
    RouteDef("max_entry", _max_entry, lambda p: 2 * _mn(p)),
    RouteDef("extremes", _extremes, lambda p: 3 * _mn(p), _prepare_spec,
             columns=("lambda1", "count_above_delta", "max_entry")),
    RouteDef("poisson_max", _poisson_max, lambda p: 4),
):
    register(_r)

# single-column views of the derivative statistics
ROUTE_COLUMNS = {"corollary1": ("corollary1", 0), "corollary1_second": ("corollary1", 1),
                 "corollary1_literal": ("corollary1", 2)}


def _resolve(route: str) -> tuple[RouteDef, Optional[int]]:
    if route in ROUTE_COLUMNS:
        base, col = ROUTE_COLUMNS[route]
        return ROUTES[base], col
    if route not in ROUTES:
        raise KeyError(f"unknown route {route!r}; known: {sorted(set(ROUTES) | set(ROUTE_COLUMNS))}")
    return ROUTES[route], None


def route_names() -> list[str]:
    return sorted(set(ROUTES) | set(ROUTE_COLUMNS))


# -- execution ---------------------------------------------------------------

def thread_count(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_size(route: RouteDef, params: dict) -> int:
    return int(max(1, min(MAX_CHUNK, CHUNK_BUDGET // max(1.0, route.cost(params)))))


def _evaluate_chunk(route: RouteDef, params, ctx, seed, lo, hi) -> np.ndarray:
    block = StreamBlock(seed, np.arange(lo, hi, dtype=np.uint64), route.name)
    try:
        vals = route.values(block, params, ctx)
    except Exception as exc:
        # locate the first failing replica by rerunning them one at a time
        for i in range(lo, hi):
            try:
                route.values(StreamBlock(seed, [i], route.name), params, ctx)
            except Exception as exc_i:
                raise RouteError(route.name, i, exc_i) from exc_i
        raise RouteError(route.name, lo, exc) from exc
    vals = np.asarray(vals)
    return vals[:, None] if vals.ndim == 1 else vals


def _map_chunks(route: RouteDef, params: dict, replicas: int, seed: int,
                threads: Optional[int], reduce: Callable):
    ctx = route.prepare(params, seed) if route.prepare else {}
    size = chunk_size(route, params)
    bounds = [(lo, min(replicas, lo + size)) for lo in range(0, replicas, size)]
    work = lambda b: reduce(_evaluate_chunk(route, params, ctx, seed, *b))
    nthreads = min(thread_count(threads), len(bounds))
    if nthreads <= 1:
        return [work(b) for b in bounds]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(work, bounds))   # map preserves chunk order


def _chunk_stats(vals: np.ndarray):
    n = vals.shape[0]
    mean = vals.sum(axis=0) / n
    dev = vals - mean
    m2 = (dev.real**2 + dev.imag**2 if np.iscomplexobj(dev) else dev * dev).sum(axis=0)
    return n, mean, m2


def _merge(stats):
    """Chan et al. pairwise update, applied in chunk order."""
    n, mean, m2 = stats[0]
    for nb, mb, m2b in stats[1:]:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        ad = delta.real**2 + delta.imag**2 if np.iscomplexobj(delta) else delta * delta
        m2 = m2 + m2b + ad * (n * nb / tot)
        n = tot
    return n, mean, m2


def _check_replicas(replicas: int) -> int:
    replicas = int(replicas)
    if replicas < 2:
        raise ValueError("replicas must be at least 2")
    return replicas


def run_estimators(route: str, params: dict, replicas: int, seed: int,
                   threads: Optional[int] = None) -> dict[str, Estimate]:
    """One pass of a (possibly multi-column) route; an Estimate per column."""
    replicas = _check_replicas(replicas)
    rdef, _ = _resolve(route)
    n, mean, m2 = _merge(_map_chunks(rdef, params, replicas, seed, threads, _chunk_stats))
    out = {}
    for j, col in enumerate(rdef.columns):
        var = m2[j] / (n - 1)
        mj = complex(mean[j]) if np.iscomplexobj(mean) else float(mean[j])
        out[col] = Estimate(mean=mj, stderr=float(math.sqrt(var / n)), replicas=n,
                            seed=int(seed), route=rdef.name if len(rdef.columns) == 1 else f"{rdef.name}:{col}",
                            params=dict(params))
    return out


def run_estimator(route: str, params: dict, replicas: int, seed: int,
                  threads: Optional[int] = None) -> Estimate:
    rdef, col = _resolve(route)
    if col is None and len(rdef.columns) != 1:
        raise ValueError(f"route {route!r} has several columns; use run_estimators")
    ests = run_estimators(rdef.name, params, replicas, seed, threads)
    est = ests[rdef.columns[col or 0]]
    return Estimate(est.mean, est.stderr, est.replicas, est.seed, route, est.params)


def replica_values(route: str, params: dict, replicas: int, seed: int,
                   threads: Optional[int] = None) -> np.ndarray:
    """All per-replica values in replica order, shape (replicas, columns)."""
    rdef, _ = _resolve(route)
    return np.concatenate(_map_chunks(rdef, params, _check_replicas(replicas), seed, threads, lambda v: v))


# -- studies -----------------------------------------------------------------

def corollary1_reference(z: float, order: str = "first") -> float:
    """Large-n limits of E det S1, E det (S1^2 + 2 S2) and E det (S1^2 + S2) at real z."""
    e = math.exp(-(2.0 / math.pi) * math.sqrt(z))
    if order == "first":
        return (2.0 / math.pi) / math.sqrt(z) * e
    if order == "second":
        return (4.0 / (math.pi**2 * z) + 2.0 / (math.pi * z**1.5)) * e
    if order == "literal":
        return (4.0 / (math.pi**2 * z) + 4.0 / (3.0 * math.pi * z**1.5)) * e
    raise ValueError(f"unknown order {order!r}")


def corollary1_statistics(spec: EnsembleSpec, z, replicas: int, seed: int,
                          threads: Optional[int] = None) -> dict[str, Estimate]:
    """E det(1 + z L)^{-1/2} S1, the second-derivative and the literal second-order statistics."""
    params = dict(spec.to_dict())
    params.pop("seed", None)
    zc = ShiftParam(z).z
    params["z"] = zc.real if zc.imag == 0 else [zc.real, zc.imag]
    return run_estimators("corollary1", params, replicas, seed, threads)


def corollary1_statistic(spec: EnsembleSpec, z, replicas: int, seed: int,
                         threads: Optional[int] = None) -> Estimate:
    return corollary1_statistics(spec, z, replicas, seed, threads)["first"]


class TailStatistic(str, Enum):
    LAMBDA1 = "lambda1"
    MAX_ENTRY = "max_entry"
    POISSON_MAX = "poisson_max"


@dataclass(frozen=True)
class TailStudyConfig:
    x_grid: tuple
    replicas: int
    statistic: TailStatistic = TailStatistic.LAMBDA1
    seed: int = 0
    delta: float = 1.0
    cutoff: float = poisson.DEFAULT_CUTOFF

    def __post_init__(self):
        xs = tuple(float(x) for x in self.x_grid)
        if not xs or any(x <= 0 for x in xs) or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("x_grid must be strictly ascending positive reals")
        object.__setattr__(self, "x_grid", xs)
        object.__setattr__(self, "statistic", TailStatistic(self.statistic))
        _check_replicas(self.replicas)


@dataclass(frozen=True)
class TailRow:
    x: float
    empirical_tail: float
    stderr: float
    reference: float
    empirical_C: float


@dataclass
class TailStudy:
    config: TailStudyConfig
    rows: list
    sup_C: float
    count_above_delta: Optional[Estimate] = None
    samples: Optional[np.ndarray] = None

    CSV_HEADER = "x,empirical_tail,stderr,reference,empirical_C"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.CSV_HEADER + "\n")
        for r in self.rows:
            buf.write(f"{r.x!r},{r.empirical_tail!r},{r.stderr!r},{r.reference!r},{r.empirical_C!r}\n")
        return buf.getvalue()

    def tail_slope(self) -> tuple[float, float]:
        """Log-log slope of the tail between the two largest grid points, with its delta-method stderr."""
        a, b = self.rows[-2], self.rows[-1]
        if a.empirical_tail <= 0 or b.empirical_tail <= 0:
            return -math.inf, math.inf
        lx = math.log(b.x / a.x)
        slope = math.log(b.empirical_tail / a.empirical_tail) / lx
        se = math.hypot(a.stderr / a.empirical_tail, b.stderr / b.empirical_tail) / lx
        return slope, se


def frechet_tail(x: float) -> float:
    """Pr(statistic > x) for the rightmost Poisson point: 1 - exp(-2 / (pi sqrt x))."""
    return -math.expm1(-poisson.tail_mass(x))


def max_entry_tail(x: float) -> float:
    return -math.expm1(-2.0 / (math.pi * x))


def tail_from_samples(values: np.ndarray, config: TailStudyConfig,
                      reference: Callable[[float], float]) -> list:
    values = np.asarray(values, dtype=float)
    N = len(values)
    rows = []
    for x in config.x_grid:
        p = float(np.count_nonzero(values > x)) / N
        rows.append(TailRow(x, p, math.sqrt(p * (1 - p) / N), reference(x), p * math.sqrt(x)))
    return rows


def tail_study(config: TailStudyConfig, spec: Optional[EnsembleSpec] = None,
               threads: Optional[int] = None) -> TailStudy:
    """Empirical tail of the chosen statistic on the grid, with the Frechet reference.

    For LAMBDA1 also reports the mean number of rescaled eigenvalues >= delta.
    """
    stat = config.statistic
    if stat is TailStatistic.POISSON_MAX:
        vals = replica_values("poisson_max", {"cutoff": config.cutoff}, config.replicas,
                              config.seed, threads)[:, 0]
        rows = tail_from_samples(vals, config, frechet_tail)
        return TailStudy(config, rows, max(r.empirical_C for r in rows), samples=vals)
    if spec is None or spec.kind not in (Kind.CAUCHY_FULL, Kind.CAUCHY_SPARSE):
        raise ValueError(f"{stat.value} tail study needs a Cauchy ensemble spec")
    params = {k: v for k, v in spec.to_dict().items() if k != "seed"}
    params["delta"] = config.delta
    vals = replica_values("extremes", params, config.replicas, config.seed, threads)
    if stat is TailStatistic.LAMBDA1:
        rows = tail_from_samples(vals[:, 0], config, frechet_tail)
    else:
        rows = tail_from_samples(vals[:, 2], config, max_entry_tail)
    cnt = vals[:, 1]
    count = Estimate(mean=float(cnt.mean()), stderr=float(cnt.std(ddof=1) / math.sqrt(len(cnt))),
                     replicas=len(cnt), seed=config.seed, route="count_above_delta",
                     params={**params, "delta": config.delta})
    return TailStudy(config, rows, max(r.empirical_C for r in rows), count, samples=vals)

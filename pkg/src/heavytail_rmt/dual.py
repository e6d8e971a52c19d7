"""Exact Gaussian / exponential integral representations as Monte Carlo estimators.

Each estimator draws auxiliary vectors and returns a quantity whose
expectation equals a determinant functional of the matrix ensemble at every
finite size.  Comparing their means with the direct spectral route is the
central cross-check of the package.

Batched functions (``*_values``) take a :class:`~heavytail_rmt.rng.StreamBlock`
and return one value per replica; the single-draw functions wrap them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import special

from .numerics import QuadratureError, QuadResult, j0_of_2sqrt, kahan_sum, _quad_real
from .rng import StreamBlock, as_block

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class Route(str, Enum):
    CAUCHY_SINGLE = "cauchy_single"
    CAUCHY_SPARSE = "cauchy_sparse"
    GENERAL_R = "general_r"
    COMPLEX_SINGLE = "complex_single"
    RADEMACHER = "rademacher"


@dataclass(frozen=True)
class DualSampleValue:
    value: complex | float
    route: Route


# -- the Psi kernel ----------------------------------------------------------

def psi(y):
    """Psi(y) = 2 e^{y^2/2} int_y^inf (2 pi)^{-1/2} e^{-u^2/2} du = erfcx(y / sqrt 2).

    The scaled complementary error function never forms e^{y^2/2}, so large
    arguments do not overflow.
    """
    out = special.erfcx(np.asarray(y, dtype=float) * _INV_SQRT2)
    return out.item() if np.ndim(out) == 0 else out


def log_psi(y):
    out = np.log(special.erfcx(np.asarray(y, dtype=float) * _INV_SQRT2))
    return out.item() if np.ndim(out) == 0 else out


# -- characteristic functions of the real entries ----------------------------

@dataclass(frozen=True)
class CharFn:
    """Characteristic function g(x) = E exp(i x a) of a real matrix entry.

    ``log`` is given when g > 0 so products can be accumulated in log space.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    log: Optional[Callable[[np.ndarray], np.ndarray]] = None


CHAR_FNS = {
    "cauchy": CharFn("cauchy", lambda x: np.exp(-np.abs(x)), lambda x: -np.abs(x)),
    "gaussian": CharFn("gaussian", lambda x: np.exp(-0.5 * x * x), lambda x: -0.5 * x * x),
    "rademacher": CharFn("rademacher", np.cos),
}


def char_fn(name_or_fn) -> CharFn:
    if isinstance(name_or_fn, CharFn):
        return name_or_fn
    try:
        return CHAR_FNS[name_or_fn]
    except KeyError:
        raise ValueError(f"unknown characteristic function {name_or_fn!r}; "
                         f"choose from {sorted(CHAR_FNS)}") from None


# -- radial densities for the complex ensembles ------------------------------

@dataclass(frozen=True)
class RadialDensity:
    """Density f of |a|^2 for a complex entry with uniformly random phase.

    ``moments(l)`` returns the l-th moment of f, ``sampler(block, k)`` draws
    ``k`` values of |a|^2 per replica, ``closed_G`` is the exact transform
    G(y) = int f(x) J0(2 sqrt(xy)) dx when known.
    """

    name: str
    pdf: Callable[[float], float]
    moments: Optional[Callable[[int], float]] = None
    sampler: Optional[Callable[[StreamBlock, int], np.ndarray]] = None
    closed_G: Optional[Callable] = None
    log_closed_G: Optional[Callable] = None
    decay_scale: float = 1.0

    def sample(self, block: StreamBlock, k: int) -> np.ndarray:
        if self.sampler is None:
            raise ValueError(f"radial density {self.name!r} has no sampler")
        return self.sampler(block, k)

    def G(self, y):
        if self.closed_G is not None:
            return self.closed_G(y)
        return np.vectorize(lambda v: radial_G(self, v).value)(y)


def _gamma2_sampler(block, k):
    e = block.exponential(2 * k)
    return e[:, :k] + e[:, k:]


RADIAL_DENSITIES = {
    "wishart_radial": RadialDensity(
        "wishart_radial", lambda x: math.exp(-x),
        moments=lambda l: math.factorial(l),
        sampler=lambda block, k: block.exponential(k),
        closed_G=lambda y: np.exp(-np.asarray(y, dtype=float)),
        log_closed_G=lambda y: -np.asarray(y, dtype=float),
    ),
    "gamma2_radial": RadialDensity(
        "gamma2_radial", lambda x: x * math.exp(-x),
        moments=lambda l: math.factorial(l + 1),
        sampler=_gamma2_sampler,
        closed_G=lambda y: (1.0 - np.asarray(y, dtype=float)) * np.exp(-np.asarray(y, dtype=float)),
    ),
}


def radial_density(name_or_f) -> RadialDensity:
    if isinstance(name_or_f, RadialDensity):
        return name_or_f
    try:
        return RADIAL_DENSITIES[name_or_f]
    except KeyError:
        raise ValueError(f"unknown radial density {name_or_f!r}; "
                         f"choose from {sorted(RADIAL_DENSITIES)}") from None


def _wynn_epsilon(seq) -> float:
    """Wynn's epsilon algorithm; returns the highest even-column estimate."""
    s = [float(v) for v in seq]
    n = len(s)
    prev = [0.0] * (n + 1)
    cur = s[:]
    best = s[-1]
    for k in range(1, n):
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0.0:
                return best
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        if k % 2 == 0 and cur:
            best = cur[-1]
    return best


def radial_G(f, y: float, tol: float = 1e-13, n_zeros: int = 50) -> QuadResult:
    """G(y) = int_0^inf f(x) J0(2 sqrt(x y)) dx.

    For y < 1e-3 the moment series sum (-1)^l alpha_l y^l / (l!)^2 is used when
    moments are known.  Otherwise the integral is split at the zeros
    x_k = j_{0,k}^2 / (4 y) of the Bessel factor; interval integrals are
    summed until they become negligible, and Wynn's epsilon algorithm
    accelerates the alternating partial sums when 50 zeros are not enough.
    """
    f = radial_density(f)
    y = float(y)
    if y < 0:
        raise ValueError("radial_G needs y >= 0")
    if y == 0.0:
        return QuadResult(1.0, 0.0, 1)
    if y < 1e-3 and f.moments is not None:
        total, terms, l = 0.0, [], 0
        while True:
            term = (-1) ** l * f.moments(l) * y**l / math.factorial(l) ** 2
            terms.append(term)
            if l > 2 and abs(term) < 1e-18:
                break
            l += 1
        return QuadResult(math.fsum(terms), abs(terms[-1]), len(terms))

    integrand = lambda x: f.pdf(x) * j0_of_2sqrt(x * y)
    zeros = special.jn_zeros(0, n_zeros) ** 2 / (4.0 * y)
    edges = np.concatenate(([0.0], zeros))
    partial, err, neval, quiet = [], 0.0, 0, 0
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e, nev = _quad_real(integrand, lo, hi, tol, 200)
        total += v
        err += e
        neval += nev
        partial.append(total)
        quiet = quiet + 1 if abs(v) < tol * max(1.0, abs(total)) else 0
        if quiet >= 3:
            return QuadResult(total, err + abs(v), neval)
    # tail beyond the last zero, then acceleration if it is still not small
    try:
        v, e, nev = _quad_real(integrand, edges[-1], math.inf, tol, 400)
        tail_ok = abs(v) < 1e-6
    except QuadratureError:
        tail_ok = False
    if tail_ok:
        return QuadResult(total + v, err + e, neval + nev)
    accelerated = _wynn_epsilon(partial[-21:])
    bound = err + abs(accelerated - partial[-1])
    if not math.isfinite(accelerated):
        raise QuadratureError("oscillatory tail did not converge", total, bound)
    return QuadResult(accelerated, bound, neval)


# -- batched estimators ------------------------------------------------------

def cauchy_dual_values(block: StreamBlock, m: int, n: int, t: float) -> np.ndarray:
    """Psi((t/(n m)) sum_k |s_k|)^m per replica, s standard normal in R^n."""
    if t < 0:
        raise ValueError("t must be non-negative")
    s = block.normal(n)
    y = (t / (n * m)) * np.sum(np.abs(s), axis=1)
    return np.exp(m * log_psi(y))


def sparse_row_count(mask: np.ndarray) -> int:
    rows = mask.sum(axis=1)
    if not np.all(rows == rows[0]):
        raise ValueError("mask rows have unequal counts; pass b explicitly")
    return int(rows[0])


def cauchy_dual_sparse_values(block: StreamBlock, mask: np.ndarray, t: float,
                              b: Optional[int] = None) -> np.ndarray:
    """prod_j Psi((t/(m b)) sum_k q_jk |s_k|) per replica, accumulated in log space."""
    if t < 0:
        raise ValueError("t must be non-negative")
    mask = np.asarray(mask, dtype=bool)
    m, n = mask.shape
    b = sparse_row_count(mask) if b is None else b
    s = block.normal(n)
    y = (t / (m * b)) * (np.abs(s) @ mask.T.astype(float))
    return np.exp(kahan_sum(log_psi(y)))


def general_r_dual_values(block: StreamBlock, m: int, n: int, ts, g="cauchy") -> np.ndarray:
    """prod_{j,k} g(sum_i t_i p_j^(i) s_k^(i)) per replica.

    Unbiased for E prod_i det(1 + t_i^2 A^t A)^(-1/2) when the entries of A
    have characteristic function g.  Cost and variance grow with m n; meant
    for identity checks at small sizes.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if ts.size == 0:
        raise ValueError("general_r_dual needs at least one t")
    if np.any(ts < 0):
        raise ValueError("all t_i must be non-negative")
    gf = char_fn(g)
    X = np.zeros((len(block), m, n))
    for ti in ts:
        s = block.normal(n)
        p = block.normal(m)
        X += ti * p[:, :, None] * s[:, None, :]
    if gf.log is not None:
        return np.exp(kahan_sum(gf.log(X).reshape(len(block), m * n)))
    return np.prod(gf.value(X).reshape(len(block), m * n), axis=1)


def complex_dual_values(block: StreamBlock, m: int, n: int, t: float, G="wishart_radial") -> np.ndarray:
    """prod_{k<=n, l<=m} G(t^2 u_k v_l) with u, v i.i.d. unit exponentials.

    Unbiased for E det(1 + t^2 A*A)^(-1) in the radial complex ensemble.
    ``G`` is a radial density (name or object) or a vectorised callable.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    u = block.exponential(n)
    v = block.exponential(m)
    if isinstance(G, (str, RadialDensity)):
        f = radial_density(G)
        if f.log_closed_G is not None and f.name == "wishart_radial":
            return np.exp(-(t * t) * u.sum(axis=1) * v.sum(axis=1))
        Gfun = f.G
    else:
        Gfun = G
    args = (t * t) * u[:, :, None] * v[:, None, :]
    return np.prod(np.asarray(Gfun(args), dtype=float).reshape(len(block), m * n), axis=1)


def rademacher_dual_values(block: StreamBlock, n: int, t: float) -> np.ndarray:
    """prod_{j,k} cos(t u_j v_k) per replica; signed, never clamped."""
    if t < 0:
        raise ValueError("t must be non-negative")
    u = block.normal(n)
    v = block.normal(n)
    return np.prod(np.cos(t * u[:, :, None] * v[:, None, :]).reshape(len(block), n * n), axis=1)


# -- single-draw operations --------------------------------------------------

def cauchy_dual_single(m: int, n: int, t: float, stream) -> DualSampleValue:
    v = cauchy_dual_values(as_block(stream), m, n, t)[0]
    return DualSampleValue(float(v), Route.CAUCHY_SINGLE)


def cauchy_dual_sparse(mask, t: float, stream, b: Optional[int] = None) -> DualSampleValue:
    v = cauchy_dual_sparse_values(as_block(stream), mask, t, b)[0]
    return DualSampleValue(float(v), Route.CAUCHY_SPARSE)


def general_r_dual(m: int, n: int, ts, stream, g="cauchy") -> DualSampleValue:
    v = general_r_dual_values(as_block(stream), m, n, ts, g)[0]
    return DualSampleValue(float(v), Route.GENERAL_R)


def complex_dual_single(m: int, n: int, t: float, G, stream) -> DualSampleValue:
    v = complex_dual_values(as_block(stream), m, n, t, G)[0]
    return DualSampleValue(float(v), Route.COMPLEX_SINGLE)


def rademacher_dual(n: int, t: float, stream) -> DualSampleValue:
    v = rademacher_dual_values(as_block(stream), n, t)[0]
    return DualSampleValue(float(v), Route.RADEMACHER)


def rademacher_bruteforce(n: int, t: float) -> float:
    """Exact average of det(1 + t^2 R^t R)^(-1/2) over all n x n sign matrices."""
    if not 1 <= n <= 4:
        raise ValueError("rademacher_bruteforce enumerates 2^(n^2) matrices; needs 1 <= n <= 4")
    k = n * n
    codes = np.arange(2**k, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(k)) & 1
    R = (1 - 2 * bits).astype(float).reshape(-1, n, n)
    s = np.linalg.svd(R, compute_uv=False)
    vals = np.exp(-0.5 * np.sum(np.log1p((t * t) * s * s), axis=1))
    return math.fsum(vals) / len(vals)

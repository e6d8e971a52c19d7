"""Poisson point process with intensity rho(x) = 1 / (pi x^{3/2}) on (0, inf).

Only points above a cutoff eps are simulated (there are infinitely many
near 0); the mass below eps enters determinant-type functionals through an
analytic multiplicative factor, see :func:`truncation_correction`.
"""
from __future__ import annotations

import cmath
import io
import math
from dataclasses import dataclass

import numpy as np

from .numerics import integrate, principal_log1p, principal_sqrt
from .rng import StreamBlock, as_block

DEFAULT_CUTOFF = 1e-8


def intensity(x):
    return 1.0 / (math.pi * np.asarray(x, dtype=float) ** 1.5)


def tail_mass(x: float) -> float:
    """Expected number of points above x: 2 / (pi sqrt x)."""
    if not x > 0:
        raise ValueError("x must be positive")
    return 2.0 / (math.pi * math.sqrt(x))


def point_from_uniform(u, cutoff: float):
    """Inverse transform: a point above ``cutoff`` is cutoff / (1 - u)^2."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("u must lie in the open interval (0, 1)")
    return cutoff / (1.0 - u) ** 2


@dataclass(frozen=True)
class PoissonSample:
    cutoff: float
    points: np.ndarray

    @property
    def maximum(self) -> float:
        return float(self.points[0]) if len(self.points) else 0.0


def _check_cutoff(cutoff: float) -> None:
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")


def sample_process(cutoff: float, stream) -> PoissonSample:
    """Points of the process in (cutoff, inf), sorted descending.

    N ~ Poisson(2 / (pi sqrt eps)); each point is eps / (1 - u)^2.
    """
    block = as_block(stream)
    if len(block) != 1:
        raise ValueError("sample_process takes a single-replica stream")
    return sample_process_block(block, cutoff)[0]


def process_log_det_values(block: StreamBlock, cutoff: float, z) -> np.ndarray:
    """sum_i -1/2 Log(1 + z x_i) over the simulated points, one value per replica.

    Counts come from the block's stream; the points of replica r come from
    the substream ``(seed, r, tag + "/points")``, so the values do not depend
    on how replicas are grouped into blocks.
    """
    _check_cutoff(cutoff)
    z = complex(z)
    counts = block.poisson(tail_mass(cutoff))
    points = StreamBlock(block.seed, block.replicas, block.tag + "/points")
    x = point_from_uniform(points.ragged_uniform(counts), cutoff) if counts.sum() else np.empty(0)
    logs = np.log1p(z.real * x) if z.imag == 0 else principal_log1p(z * x)
    ends = np.cumsum(counts)
    sums = np.zeros(len(block), dtype=logs.dtype)
    nonempty = counts > 0
    if nonempty.any():
        starts = (ends - counts)[nonempty]
        sums[nonempty] = np.add.reduceat(logs, starts)
    return -0.5 * sums


def sample_process_block(block: StreamBlock, cutoff: float) -> list[PoissonSample]:
    """Batched :func:`sample_process`, consistent with the ragged draw layout."""
    _check_cutoff(cutoff)
    counts = block.poisson(tail_mass(cutoff))
    points = StreamBlock(block.seed, block.replicas, block.tag + "/points")
    x = point_from_uniform(points.ragged_uniform(counts), cutoff) if counts.sum() else np.empty(0)
    pieces = np.split(x, np.cumsum(counts)[:-1])
    return [PoissonSample(cutoff, np.sort(p)[::-1]) for p in pieces]


def max_point_values(block: StreamBlock, cutoff: float) -> np.ndarray:
    """Rightmost point per replica (0 when the replica has no point above cutoff).

    Drawn directly: given N points above eps, the maximum has CDF
    ((1 - sqrt(eps / x)))^N, so max = eps / (1 - u^(1/N))^2.
    """
    _check_cutoff(cutoff)
    counts = block.poisson(tail_mass(cutoff))
    u = block.uniform(1)[:, 0]
    out = np.zeros(len(block))
    has = counts > 0
    out[has] = cutoff / (1.0 - u[has] ** (1.0 / counts[has])) ** 2
    return out


def poisson_det_expectation(z) -> complex:
    """E prod_i (1 + z x_i)^{-1/2} = exp(-(2/pi) sqrt z), principal branch."""
    z = complex(z)
    if not z.real > 0:
        raise ValueError(f"needs Re z > 0, got {z}")
    return cmath.exp(-(2.0 / math.pi) * principal_sqrt(z))


def truncation_correction(z, cutoff: float, tol: float = 1e-13) -> complex:
    """exp(int_0^eps ((1 + z x)^{-1/2} - 1) rho(x) dx) by quadrature.

    The integrand behaves like -z / (2 pi sqrt x) at the origin, handled by
    the x = w^2 substitution.
    """
    z = complex(z)
    if not z.real > 0 and z != 0:
        raise ValueError(f"needs Re z > 0, got {z}")
    _check_cutoff(cutoff)
    if z == 0:
        return 1.0 + 0j
    res = head_integral(z, cutoff, tol)
    return cmath.exp(res.value)


def _f_rho(z: complex):
    # ((1 + z x)^{-1/2} - 1) rho(x), written to avoid cancellation at small z x
    def f(x):
        w = z * x
        root = cmath.sqrt(1.0 + w)
        return -w / (root * (1.0 + root)) / (math.pi * x**1.5)
    return f


def head_integral(z, cutoff: float, tol: float = 1e-13):
    """int_0^cutoff ((1 + z x)^{-1/2} - 1) rho(x) dx as a QuadResult."""
    return integrate(_f_rho(complex(z)), 0.0, cutoff, tol=tol,
                     singularity="inverse_sqrt_left", complex_valued=True)


def tail_integral(z, cutoff: float, tol: float = 1e-13):
    """The same integrand over (cutoff, inf)."""
    return integrate(_f_rho(complex(z)), cutoff, math.inf, tol=tol, complex_valued=True)


def frechet_rightmost_cdf(x: float) -> float:
    """Law of the rightmost point: exp(-2 / (pi sqrt x))."""
    if not x > 0:
        raise ValueError("x must be positive")
    return math.exp(-tail_mass(x))


def max_entry_cdf(x: float) -> float:
    """Limit law of max|a_jk| / (n m) for Cauchy entries: exp(-2 / (pi x))."""
    if not x > 0:
        raise ValueError("x must be positive")
    return math.exp(-2.0 / (math.pi * x))


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    buf.write("replica_id,point\n")
    for rid, s in enumerate(samples):
        for p in s.points:
            buf.write(f"{rid},{float(p)!r}\n")
    return buf.getvalue()

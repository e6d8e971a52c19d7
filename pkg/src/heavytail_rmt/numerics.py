"""Shared numerical kernel: quadrature, special functions, complex branches."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _sp_integrate
from scipy import special

SINGULARITY_HINTS = ("none", "inverse_sqrt_left", "sqrt_vanish_both")


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its subdivision cap; carries the best estimate."""

    def __init__(self, message: str, value, err_bound: float):
        super().__init__(f"{message} (best estimate {value!r}, error bound {err_bound:.3g})")
        self.value = value
        self.err_bound = err_bound


@dataclass(frozen=True)
class QuadResult:
    value: complex | float
    err_bound: float
    evaluations: int
    log_value: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"value": _jsonable(self.value), "err_bound": self.err_bound,
             "evaluations": self.evaluations}
        if self.log_value is not None:
            d["log_value"] = self.log_value
        return d


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return float(v)


def _quad_real(f, a, b, tol, limit, points=None):
    kw = dict(epsabs=tol, epsrel=tol, limit=limit, full_output=1)
    if points is not None and math.isfinite(a) and math.isfinite(b):
        kw["points"] = points
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _sp_integrate.IntegrationWarning)
        res = _sp_integrate.quad(f, a, b, **kw)
    value, err, info = res[0], res[1], res[2]
    if not math.isfinite(value):
        raise QuadratureError("quadrature produced a non-finite value", value, err)
    if len(res) > 3:
        # roundoff-limited results that still meet the tolerance are accepted
        if "roundoff" in res[3] and err <= 10 * tol * max(1.0, abs(value)):
            return value, err, info["neval"]
        raise QuadratureError(f"quadrature did not converge: {res[3].strip()}", value, err)
    return value, err, info["neval"]


def integrate(f: Callable, a: float, b: float = math.inf, tol: float = 1e-12,
              singularity: str = "none", complex_valued: bool = False,
              limit: int = 400, points=None) -> QuadResult:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``(a, b)``.

    ``b`` may be ``inf``.  The singularity hint selects a change of variables
    that removes a known endpoint behaviour:

    ``inverse_sqrt_left``  f ~ (x - a)^(-1/2); uses x = a + w^2.
    ``sqrt_vanish_both``   f ~ sqrt((x - a)(b - x)); uses x = a + (b - a)(1 - cos s)/2.

    The error bound is the a-posteriori Kronrod estimate; it is not rigorous.
    """
    if singularity not in SINGULARITY_HINTS:
        raise ValueError(f"unknown singularity hint {singularity!r}")
    if not a < b:
        if a == b:
            return QuadResult(0.0, 0.0, 1)
        raise ValueError("integration domain must satisfy a < b")

    if singularity == "inverse_sqrt_left":
        g = lambda w: 2.0 * w * f(a + w * w)
        lo, hi = 0.0, math.sqrt(b - a) if math.isfinite(b) else math.inf
        pts = None if points is None else [math.sqrt(p - a) for p in points]
    elif singularity == "sqrt_vanish_both":
        if not math.isfinite(b):
            raise ValueError("sqrt_vanish_both needs a finite interval")
        half = 0.5 * (b - a)
        g = lambda s: half * math.sin(s) * f(a + half * (1.0 - math.cos(s)))
        lo, hi = 0.0, math.pi
        pts = None if points is None else [math.acos(1.0 - (p - a) / half) for p in points]
    else:
        g, lo, hi, pts = f, a, b, points

    if complex_valued:
        re, e1, n1 = _quad_real(lambda x: complex(g(x)).real, lo, hi, tol, limit, pts)
        im, e2, n2 = _quad_real(lambda x: complex(g(x)).imag, lo, hi, tol, limit, pts)
        return QuadResult(complex(re, im), math.hypot(e1, e2), n1 + n2)
    val, err, neval = _quad_real(g, lo, hi, tol, limit, pts)
    return QuadResult(val, err, neval)


def integrate_peaked_log(logf: Callable, peak: float, curvature: float,
                         a: float = 0.0, b: float = math.inf, width_factor: float = 40.0,
                         tol: float = 1e-13) -> QuadResult:
    """Integral of exp(logf) over (a, b) for a unimodal integrand.

    ``peak`` is the maximiser of ``logf`` (possibly the endpoint ``a``) and
    ``curvature`` an estimate of ``-logf''(peak)``.  The integrand is divided
    by its peak value before integration and the window around the peak is
    integrated separately from the tails, so narrow peaks are not missed and
    results far below the double range keep an exact ``log_value``.
    ``logf`` must be finite on [a, b).
    """
    peak = min(max(peak, a), b)
    h_peak = float(logf(peak))
    g = lambda x: math.exp(float(logf(x)) - h_peak)
    width = 1.0 / math.sqrt(curvature) if curvature > 0 else 1.0
    cuts = sorted({a, max(a, peak - width_factor * width), peak,
                   min(b, peak + width_factor * width), b})
    total, err, neval = 0.0, 0.0, 0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            v, e, n = _quad_real(g, lo, hi, tol, 400)
            total += v
            err += e
            neval += n
    log_value = h_peak + math.log(total)
    if log_value > 709.0:
        value = math.inf
    else:
        value = math.exp(log_value) if log_value > -745.0 else 0.0
    err_bound = err * math.exp(h_peak) if h_peak < 700.0 else math.inf
    return QuadResult(value, err_bound, neval, log_value=log_value)


def j0_of_2sqrt(x: float) -> float:
    """phi(x) = sum_l (-1)^l x^l / (l!)^2 = J0(2 sqrt(x)).

    Power series below x = 25 (terms summed with fsum to contain the
    cancellation), scipy's Bessel J0 above.
    """
    x = float(x)
    if x < 0:
        raise ValueError("j0_of_2sqrt is defined for x >= 0")
    if x >= 25.0:
        return float(special.j0(2.0 * math.sqrt(x)))
    return _phi_series(x)


def _phi_series(x: float) -> float:
    terms = []
    term = 1.0
    l = 0
    while True:
        terms.append(term)
        l += 1
        term *= -x / (l * l)
        if abs(term) < 1e-18 * max(1.0, abs(terms[-1])) and l > x:
            break
    return math.fsum(terms)


def principal_sqrt(z: complex) -> complex:
    """Principal square root restricted to Re z > 0, with sqrt(1) = 1."""
    z = complex(z)
    if not z.real > 0:
        raise ValueError(f"principal_sqrt needs Re z > 0, got {z}")
    return complex(np.sqrt(z))


def principal_log1p(w):
    """Principal log(1 + w), accurate for small |w|.

    Real input uses ``log1p``; complex input splits into
    0.5 log1p(2 Re w + |w|^2) + i arg(1 + w).  Callers guarantee
    Re w > -1 so 1 + w stays off the branch cut.
    """
    w = np.asarray(w)
    if not np.iscomplexobj(w):
        return np.log1p(w)
    re, im = w.real, w.imag
    if np.any(re <= -1.0):
        raise ValueError("principal_log1p needs Re w > -1")
    return 0.5 * np.log1p(2.0 * re + re * re + im * im) + 1j * np.arctan2(im, 1.0 + re)


def log_gamma(x: float) -> float:
    x = float(x)
    if not x > 0:
        raise ValueError(f"log_gamma needs x > 0, got {x}")
    return float(special.gammaln(x))


def kahan_sum(values, axis: int = -1) -> np.ndarray:
    """Neumaier-compensated sum along ``axis`` (vectorised over the rest)."""
    v = np.moveaxis(np.asarray(values), axis, -1)
    s = np.zeros(v.shape[:-1], dtype=v.dtype)
    c = np.zeros_like(s)
    for k in range(v.shape[-1]):
        x = v[..., k]
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c = c + np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c

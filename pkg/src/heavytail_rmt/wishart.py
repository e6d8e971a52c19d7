"""Closed forms for the Gaussian (Wishart) ensembles backed by quadrature.

All determinant integrals are accumulated in log space with log-Gamma
normalisations; ``QuadResult.log_value`` stays exact when ``value``
underflows (n in the hundreds and beyond).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .numerics import QuadResult, integrate, integrate_peaked_log, log_gamma


def _check(n: int, m: int, t: float) -> None:
    if not (n >= 1 and m >= n):
        raise ValueError(f"need m >= n >= 1, got n={n}, m={m}")
    if t < 0:
        raise ValueError("t must be non-negative")


def _positive_root(c: float, k: float, m: int) -> float:
    """Positive root of c y^2 + (1 + m c - k c) y - k = 0 (0 when k = 0)."""
    if k <= 0:
        return 0.0
    bq = 1.0 + m * c - k * c
    if c == 0.0:
        return k / bq
    disc = math.sqrt(bq * bq + 4.0 * c * k)
    # cancellation-free form of (-bq + disc) / (2c)
    return 2.0 * k / (bq + disc) if bq > 0 else (disc - bq) / (2.0 * c)


def wishart_real_det_integral(n: int, m: int, t: float, scaled: bool = False) -> QuadResult:
    """E det(1 + t^2 A^t A)^(-1/2) for an m x n standard Gaussian matrix.

    Evaluated in the radial variable r = |s|:
    c_n int_0^inf e^{-r^2/2} r^{n-1} (1 + t^2 r^2)^{-m/2} dr with
    c_n^{-1} = 2^{n/2-1} Gamma(n/2).  ``scaled`` replaces t^2 by t^2 / n.
    """
    _check(n, m, t)
    c = t * t / n if scaled else t * t
    if c == 0.0:
        return QuadResult(1.0, 0.0, 1, log_value=0.0)
    log_norm = (n / 2 - 1) * math.log(2.0) + log_gamma(n / 2)

    def logf(r):
        head = (n - 1) * math.log(r) if n > 1 else 0.0
        return head - 0.5 * r * r - 0.5 * m * math.log1p(c * r * r) - log_norm

    r_star = math.sqrt(_positive_root(c, n - 1, m))
    if r_star > 0:
        cr2 = c * r_star * r_star
        curv = (n - 1) / r_star**2 + 1.0 + m * c * (1.0 - cr2) / (1.0 + cr2) ** 2
    else:
        curv = 1.0 + m * c
    return integrate_peaked_log(logf, r_star, max(curv, 1e-12))


def wishart_complex_det_integral(n: int, m: int, t: float, scaled: bool = False) -> QuadResult:
    """E det(1 + t^2 A^* A)^(-1) for an m x n standard complex Gaussian matrix.

    int_0^inf u^{n-1} e^{-u} (1 + t^2 u)^{-m} du / Gamma(n); ``scaled``
    replaces t^2 by t^2 / n.
    """
    _check(n, m, t)
    c = t * t / n if scaled else t * t
    if c == 0.0:
        return QuadResult(1.0, 0.0, 1, log_value=0.0)
    lg = log_gamma(n)

    def logf(u):
        head = (n - 1) * math.log(u) if n > 1 else 0.0
        return head - u - m * math.log1p(c * u) - lg

    u_star = _positive_root(c, n - 1, m)
    if u_star > 0:
        curv = (n - 1) / u_star**2 - m * c * c / (1.0 + c * u_star) ** 2
    else:
        curv = (1.0 + m * c) ** 2
    return integrate_peaked_log(logf, u_star, max(curv, 1e-12))


def lemma1_residual(m: int, n: int, z: float) -> float:
    """|E_{2m x 2n, real} det(1 + z/2 A^t A)^{-1/2} - E_{m x n, complex} det(1 + z A^* A)^{-1}|.

    The two sides go through different quadratures (radial Gaussian form
    for the real ensemble, Gamma form for the complex one).
    """
    if not z > 0:
        raise ValueError("z must be positive")
    real = wishart_real_det_integral(2 * n, 2 * m, math.sqrt(z / 2.0))
    cplx = wishart_complex_det_integral(n, m, math.sqrt(z))
    return abs(real.value - cplx.value)


# -- steepest descent, square case ------------------------------------------

@dataclass(frozen=True)
class SaddleData:
    t: float
    z_star: float
    second_deriv: float


def _L_second(z: float, t: float, ratio: float = 1.0) -> float:
    # L(z) = z + ratio ln(1 + t^2 z) - ln z
    return 1.0 / (z * z) - ratio * t**4 / (1.0 + t * t * z) ** 2


def saddle(t: float) -> SaddleData:
    """Positive root of t^2 z^2 + z - 1 = 0 and L''(z*) for m = n.

    z* = 2 / (1 + sqrt(4 t^2 + 1)), which avoids the cancellation in
    (-1 + sqrt(4 t^2 + 1)) / (2 t^2) at small t; t = 0 gives the limit 1.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    z_star = 2.0 / (1.0 + math.sqrt(4.0 * t * t + 1.0))
    return SaddleData(t=t, z_star=z_star, second_deriv=_L_second(z_star, t))


def steepest_descent_log(n: int, t: float) -> float:
    """Log of the Laplace approximation to wishart_real_det_integral(n, n, t, scaled=True).

    The scaled integral equals
    (n/2)^{n/2} / Gamma(n/2) int_0^inf e^{-(n/2) L(z)} z^{-1} dz
    with L(z) = z + ln(1 + t^2 z) - ln z.  At the saddle 1 + t^2 z* = 1/z*,
    so L(z*) = z* - 2 ln z*, and the Gaussian width is sqrt(4 pi / (n L''(z*))).
    """
    if n < 1 or t <= 0:
        raise ValueError("need n >= 1 and t > 0")
    sd = saddle(t)
    zs = sd.z_star
    return (0.5 * n * math.log(0.5 * n) - log_gamma(0.5 * n)
            - 0.5 * n * zs + (n - 1) * math.log(zs)
            + 0.5 * math.log(4.0 * math.pi / (n * sd.second_deriv)))


def steepest_descent_value(n: int, t: float) -> float:
    return math.exp(steepest_descent_log(n, t))


# -- Marchenko-Pastur --------------------------------------------------------

@dataclass(frozen=True)
class MPParams:
    gamma: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma = m/n must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def a(self) -> float:
        return self.sigma2 * (1.0 - self.gamma**-0.5) ** 2

    @property
    def b(self) -> float:
        return self.sigma2 * (1.0 + self.gamma**-0.5) ** 2


def mp_density(x, params: MPParams):
    """gamma / (2 pi x sigma^2) sqrt((b - x)(x - a)) on [a, b], zero elsewhere."""
    x = np.asarray(x, dtype=float)
    a, b = params.a, params.b
    inside = (x > a) & (x < b)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = params.gamma / (2 * math.pi * xi * params.sigma2) * np.sqrt((b - xi) * (xi - a))
    return out.item() if out.ndim == 0 else out


def _mp_integral(weight, params: MPParams, tol: float) -> QuadResult:
    a, b = params.a, params.b
    if a == 0.0:
        # gamma = 1: density ~ x^{-1/2} at 0; x = w^2 leaves a smooth integrand
        k = params.gamma / (math.pi * params.sigma2)
        return integrate(lambda w: k * math.sqrt(max(b - w * w, 0.0)) * weight(w * w),
                         0.0, math.sqrt(b), tol=tol)
    return integrate(lambda x: float(mp_density(x, params)) * weight(x) if a < x < b else 0.0,
                     a, b, tol=tol, singularity="sqrt_vanish_both")


def mp_normalization(params: MPParams, tol: float = 1e-12) -> QuadResult:
    return _mp_integral(lambda x: 1.0, params, tol)


def mp_log_integral(t: float, params: MPParams, tol: float = 1e-12) -> QuadResult:
    """-1/2 int_a^b ln(1 + t^2 x) p_gamma(x) dx."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return QuadResult(0.0, 0.0, 1)
    r = _mp_integral(lambda x: math.log1p(t * t * x), params, tol)
    return QuadResult(-0.5 * r.value, 0.5 * r.err_bound, r.evaluations)


def log_rate(n: int, t: float) -> float:
    """(1/n) ln E det(1 + t^2/n A^t A)^{-1/2} for the square real Wishart ensemble."""
    return wishart_real_det_integral(n, n, t, scaled=True).log_value / n


def richardson_limit(ns, values) -> float:
    """Polynomial extrapolation in h = 1/n to h = 0 through all given points."""
    h = 1.0 / np.asarray(ns, dtype=float)
    coeffs = np.polyfit(h, np.asarray(values, dtype=float), len(h) - 1)
    return float(np.polyval(coeffs, 0.0))


# -- hard-edge Bessel kernel -------------------------------------------------

def _bessel_diag(x: float, alpha: float) -> float:
    u = 2.0 * math.sqrt(x)
    j = special.jv(alpha, u)
    jp = special.jvp(alpha, u)
    return jp * jp + (1.0 - alpha * alpha / (u * u)) * j * j


def bessel_kernel(x: float, y: float, alpha: float = 0.0) -> float:
    """Bessel kernel [J(2 sqrt x) sqrt y J'(2 sqrt y) - J(2 sqrt y) sqrt x J'(2 sqrt x)] / (x - y).

    Near the diagonal the symmetric kernel is evaluated at the midpoint with
    the confluent form J'(u)^2 + (1 - alpha^2/u^2) J(u)^2, u = 2 sqrt x (the
    error is second order in |x - y|).
    """
    if not (x > 0 and y > 0):
        raise ValueError("bessel_kernel needs x, y > 0")
    if abs(x - y) <= 1e-6 * max(1.0, x, y):
        return float(_bessel_diag(0.5 * (x + y), alpha))
    ux, uy = 2.0 * math.sqrt(x), 2.0 * math.sqrt(y)
    num = (special.jv(alpha, ux) * math.sqrt(y) * special.jvp(alpha, uy)
           - special.jv(alpha, uy) * math.sqrt(x) * special.jvp(alpha, ux))
    return float(num / (x - y))


def clt_variance_hook(t: float):
    """Placeholder for the variance constant d(t) of the log-determinant CLT.

    Its formula is not part of the material implemented here; callers get
    ``NotImplementedError`` rather than a guessed value.
    """
    raise NotImplementedError("d(t) is not available; see README")

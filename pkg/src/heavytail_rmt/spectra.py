"""Rescaled singular spectra and determinant functionals."""
from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ensembles import EnsembleSpec, Kind, MatrixSample
from .numerics import kahan_sum, principal_log1p


class Regime(str, Enum):
    EXTREME = "extreme"
    WISHART_GLOBAL = "wishart_global"
    RAW = "raw"


@dataclass(frozen=True)
class ShiftParam:
    """Complex shift z with Re z > 0 (equivalently z = t^2 for real t)."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if not z.real > 0:
            raise ValueError(f"shift parameter needs Re z > 0, got {z}")
        object.__setattr__(self, "z", z)

    @classmethod
    def from_t(cls, t: float) -> "ShiftParam":
        return cls(complex(float(t) ** 2))

    @property
    def is_real(self) -> bool:
        return self.z.imag == 0.0


@dataclass(frozen=True)
class SpectrumSample:
    lambdas: np.ndarray
    scale: float
    spec: EnsembleSpec
    regime: Regime = Regime.EXTREME

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# m={self.spec.m} n={self.spec.n} scale={self.scale!r} seed={self.spec.seed}\n")
        buf.write("rank,lambda_rescaled\n")
        for i, lam in enumerate(self.lambdas, start=1):
            buf.write(f"{i},{float(lam)!r}\n")
        return buf.getvalue()


def spectrum_scale(spec: EnsembleSpec, regime: Regime) -> float:
    regime = Regime(regime)
    if regime is Regime.RAW:
        return 1.0
    if regime is Regime.WISHART_GLOBAL:
        return float(spec.n)
    if spec.kind is Kind.CAUCHY_SPARSE:
        return float(spec.m * spec.b) ** 2
    return float(spec.m * spec.n) ** 2


def singular_values_squared(entries: np.ndarray) -> np.ndarray:
    """Squared singular values, sorted descending along the last axis.

    Works on a single matrix or a stack.  The Gram matrix is never formed.
    """
    a = np.asarray(entries)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError("matrix has non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    return s * s


def rescaled_spectrum(matrix: MatrixSample, regime: Regime = Regime.EXTREME) -> SpectrumSample:
    scale = spectrum_scale(matrix.spec, regime)
    lam = singular_values_squared(matrix.entries) / scale
    return SpectrumSample(lambdas=lam, scale=scale, spec=matrix.spec, regime=Regime(regime))


def _lambdas(spectrum) -> np.ndarray:
    lam = spectrum.lambdas if isinstance(spectrum, SpectrumSample) else np.asarray(spectrum, dtype=float)
    if np.any(lam < 0):
        raise ValueError("rescaled eigenvalues must be non-negative")
    return lam


def _z(z) -> complex:
    return z.z if isinstance(z, ShiftParam) else ShiftParam(z).z


def log_det_functional(spectrum, z, power: float = 0.5):
    """-power * sum_i Log(1 + z lambda_i), compensated, along the last axis."""
    lam = _lambdas(spectrum)
    zc = _z(z)
    if lam.shape[-1] == 0:
        return np.zeros(lam.shape[:-1]) if lam.ndim > 1 else 0.0
    w = lam * (zc.real if zc.imag == 0.0 else zc)
    logs = principal_log1p(w)
    return -power * kahan_sum(logs)


def det_functional(spectrum, z, power: float = 0.5):
    """prod_i (1 + z lambda_i)^(-power) on the principal branch.

    Real for real z; accepts a stack of spectra (last axis = eigenvalues).
    """
    if power not in (0.5, 1, 1.0):
        raise ValueError("power must be 1/2 or 1")
    out = np.exp(log_det_functional(spectrum, z, power))
    return out.item() if np.ndim(out) == 0 else out


def weighted_resolvent_sums(spectrum, z):
    """S1 = sum lambda/(1 + z lambda) and S2 = sum lambda^2/(1 + z lambda)^2."""
    lam = _lambdas(spectrum)
    zc = _z(z)
    zz = zc.real if zc.imag == 0.0 else zc
    r = lam / (1.0 + zz * lam)
    s1 = np.sum(r, axis=-1)
    s2 = np.sum(r * r, axis=-1)
    if np.ndim(s1) == 0:
        return s1.item(), s2.item()
    return s1, s2

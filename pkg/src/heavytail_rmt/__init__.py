"""Spectral statistics of random matrices with Cauchy entries, cross-checked by independent routes."""
from __future__ import annotations

from .ensembles import EnsembleSpec, InvalidSpec, Kind, MatrixSample, sample_matrix, sample_sparse_mask
from .harness import ComparisonReport, Estimate, compare, corollary1_statistic, run_estimator, tail_study
from .numerics import QuadratureError, QuadResult
from .rng import RngStream, StreamBlock
from .spectra import Regime, ShiftParam, SpectrumSample, det_functional, rescaled_spectrum

__all__ = [
    "ComparisonReport", "EnsembleSpec", "Estimate", "InvalidSpec", "Kind", "MatrixSample",
    "QuadResult", "QuadratureError", "Regime", "RngStream", "ShiftParam", "SpectrumSample",
    "StreamBlock", "compare", "corollary1_statistic", "det_functional", "rescaled_spectrum",
    "run_estimator", "sample_matrix", "sample_sparse_mask", "tail_study",
]

"""Seeded samplers for the matrix families and the sparse 0-1 mask."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .rng import RngStream, StreamBlock, as_block


class Kind(str, Enum):
    CAUCHY_FULL = "cauchy_full"
    CAUCHY_SPARSE = "cauchy_sparse"
    WISHART_REAL = "wishart_real"
    WISHART_COMPLEX = "wishart_complex"
    RADEMACHER = "rademacher"


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    """Which random matrix family to draw, its shape, sparsity and seed.

    ``b`` is the number of nonzeros per row of the mask (``CauchySparse``
    only).  With ``bernoulli_relaxed`` every cell is kept independently with
    probability ``b / n`` instead.
    """

    kind: Kind
    m: int
    n: int
    b: Optional[int] = None
    bernoulli_relaxed: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        self.validate()

    def validate(self) -> None:
        if not (isinstance(self.m, (int, np.integer)) and isinstance(self.n, (int, np.integer))):
            raise InvalidSpec("m and n must be integers")
        if self.n < 1 or self.m < 1:
            raise InvalidSpec(f"m and n must be positive, got m={self.m}, n={self.n}")
        if self.m < self.n:
            raise InvalidSpec(f"m >= n required, got m={self.m}, n={self.n}")
        if self.kind is Kind.CAUCHY_SPARSE:
            if self.b is None:
                raise InvalidSpec("cauchy_sparse needs b")
            if not 1 <= self.b <= self.n:
                raise InvalidSpec(f"b must lie in [1, n={self.n}], got {self.b}")
        elif self.b is not None:
            raise InvalidSpec(f"b is only valid for cauchy_sparse, not {self.kind.value}")
        if self.bernoulli_relaxed and self.kind is not Kind.CAUCHY_SPARSE:
            raise InvalidSpec("bernoulli_relaxed is only valid for cauchy_sparse")
        if self.kind is Kind.RADEMACHER and self.m != self.n:
            raise InvalidSpec("rademacher matrices are square")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    @property
    def is_complex(self) -> bool:
        return self.kind is Kind.WISHART_COMPLEX

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "m": self.m, "n": self.n}
        if self.kind is Kind.CAUCHY_SPARSE:
            d["b"] = self.b
        d["bernoulli_relaxed"] = self.bernoulli_relaxed
        d["seed"] = int(self.seed)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        allowed = {"kind", "m", "n", "b", "bernoulli_relaxed", "seed"}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidSpec(f"unknown EnsembleSpec keys: {sorted(unknown)}")
        missing = {"kind", "m", "n"} - set(d)
        if missing:
            raise InvalidSpec(f"missing EnsembleSpec keys: {sorted(missing)}")
        try:
            kind = Kind(d["kind"])
        except ValueError:
            raise InvalidSpec(f"unknown kind {d['kind']!r}") from None
        return cls(kind=kind, m=d["m"], n=d["n"], b=d.get("b"),
                   bernoulli_relaxed=bool(d.get("bernoulli_relaxed", False)),
                   seed=int(d.get("seed", 0)))

    @classmethod
    def from_json(cls, text: str) -> "EnsembleSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MatrixSample:
    entries: np.ndarray
    spec: EnsembleSpec
    mask: Optional[np.ndarray] = None


def sample_sparse_mask(m: int, n: int, b: int, bernoulli_relaxed: bool,
                       stream, axis: str = "row") -> np.ndarray:
    """0-1 mask with ``b`` nonzeros per row (or per column with ``axis="column"``).

    Exact mode picks the positions uniformly without replacement.  Relaxed
    mode keeps each cell independently with probability ``b / n``; its row
    sums are Binomial(n, b/n).
    """
    if not 1 <= b <= n:
        raise InvalidSpec(f"b must lie in [1, n={n}], got {b}")
    block = as_block(stream)
    if len(block) != 1:
        raise ValueError("sample_sparse_mask takes a single-replica stream")
    if bernoulli_relaxed:
        p = b / n
        mask = np.empty((m, n), dtype=bool)
        rows_per_chunk = max(1, 2**20 // n)
        for r0 in range(0, m, rows_per_chunk):
            r1 = min(m, r0 + rows_per_chunk)
            mask[r0:r1] = block.uniform((r1 - r0) * n)[0].reshape(r1 - r0, n) < p
        return mask
    if axis == "row":
        lines, width = m, n
    elif axis == "column":
        if b > m:
            raise InvalidSpec(f"b must not exceed m={m} for column masks")
        lines, width = n, m
    else:
        raise ValueError(f"axis must be 'row' or 'column', got {axis!r}")
    keys = block.uniform(lines * width)[0].reshape(lines, width)
    chosen = np.argsort(keys, axis=1, kind="stable")[:, :b]
    mask = np.zeros((lines, width), dtype=bool)
    np.put_along_axis(mask, chosen, True, axis=1)
    return mask if axis == "row" else mask.T


def draw_entries(kind: Kind, m: int, n: int, block: StreamBlock) -> np.ndarray:
    """Entries for a batch of replicas, shape (R, m, n).

    Draws are consumed row-major per replica, so the single-matrix sampler
    and the batched path agree replica by replica.
    """
    kind = Kind(kind)
    R = len(block)
    k = m * n
    if kind in (Kind.CAUCHY_FULL, Kind.CAUCHY_SPARSE):
        x = block.cauchy(k)
    elif kind is Kind.WISHART_REAL:
        x = block.normal(k)
    elif kind is Kind.WISHART_COMPLEX:
        z = block.normal(2 * k) * np.sqrt(0.5)
        x = z[:, :k] + 1j * z[:, k:]
    elif kind is Kind.RADEMACHER:
        x = block.signs(k)
    else:  # pragma: no cover
        raise InvalidSpec(kind)
    return x.reshape(R, m, n)


def sample_matrix(spec: EnsembleSpec, stream: RngStream) -> MatrixSample:
    """One draw of the full matrix described by ``spec``.

    For ``cauchy_sparse`` the mask is drawn first from the same stream.
    """
    spec.validate()
    block = as_block(stream)
    mask = None
    if spec.kind is Kind.CAUCHY_SPARSE:
        mask = sample_sparse_mask(spec.m, spec.n, spec.b, spec.bernoulli_relaxed, block)
    entries = draw_entries(spec.kind, spec.m, spec.n, block)[0]
    if mask is not None:
        entries = np.where(mask, entries, 0.0)
    return MatrixSample(entries=entries, spec=spec, mask=mask)


def sample_radial_complex(m: int, n: int, density, block: StreamBlock) -> np.ndarray:
    """Complex matrices with i.i.d. entries sqrt(X) e^{i theta}, X ~ density.

    Batched, shape (R, m, n).  ``density`` is a
    :class:`heavytail_rmt.dual.RadialDensity` with a sampler.
    """
    k = m * n
    modulus_sq = density.sample(block, k)
    theta = 2.0 * np.pi * block.uniform(k)
    z = np.sqrt(modulus_sq) * np.exp(1j * theta)
    return z.reshape(len(block), m, n)

"""Counter-based random streams.

Every replica of every Monte Carlo run draws from its own substream, keyed by
``(seed, purpose tag)`` and indexed by the replica number.  The generator is
Philox4x32-10: the output for a given ``(key, counter)`` is a pure function,
so a block of replicas can be generated in one vectorised call and still
produce exactly the numbers each replica would have drawn on its own.

Counter layout (four 32-bit words)::

    c0, c1  position inside the replica's stream (64 bit)
    c2, c3  replica index (64 bit)
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy import special, stats

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 bijection applied elementwise.

    ``counter`` is a sequence of four integer arrays (values < 2**32) and
    ``key`` a pair of integers.  Returns four ``uint64`` arrays holding the
    32-bit output words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in counter)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for r in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ k0,
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ k1,
            p0 & _MASK32,
        )
        if r + 1 < rounds:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def derive_key(seed: int, tag: str) -> tuple[int, int]:
    """64-bit Philox key from a user seed and a purpose tag."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    h = hashlib.blake2b(f"{int(seed)}:{tag}".encode(), digest_size=8).digest()
    word = int.from_bytes(h, "little")
    return word & 0xFFFFFFFF, word >> 32


class StreamBlock:
    """Independent substreams for a batch of replicas.

    Row ``i`` of every draw is what ``RngStream(seed, replicas[i], tag)``
    would return for the same sequence of calls.  Each call consumes whole
    Philox blocks (two doubles per block), so interleaving draws of odd
    length keeps batched and single-replica streams in lockstep.

    A block must not be shared between threads.
    """

    def __init__(self, seed: int, replicas, tag: str = "default"):
        self.seed = int(seed)
        self.tag = tag
        self.replicas = np.atleast_1d(np.asarray(replicas, dtype=np.uint64))
        self.key = derive_key(self.seed, tag)
        self.position = 0

    def __len__(self) -> int:
        return len(self.replicas)

    def _raw53(self, k: int) -> np.ndarray:
        nblocks = (k + 1) // 2
        pos = np.arange(self.position, self.position + nblocks, dtype=np.uint64)
        self.position += nblocks
        rep = self.replicas[:, None]
        shape = (len(self.replicas), nblocks)
        c0 = np.broadcast_to(pos & _MASK32, shape)
        c1 = np.broadcast_to(pos >> _SHIFT32, shape)
        c2 = np.broadcast_to(rep & _MASK32, shape)
        c3 = np.broadcast_to(rep >> _SHIFT32, shape)
        x0, x1, x2, x3 = philox4x32((c0, c1, c2, c3), self.key)
        a = (x0 << np.uint64(21)) ^ (x1 >> np.uint64(11))
        b = (x2 << np.uint64(21)) ^ (x3 >> np.uint64(11))
        bits = np.stack((a, b), axis=-1).reshape(len(self.replicas), 2 * nblocks)
        return bits[:, :k] & np.uint64((1 << 53) - 1)

    def uniform(self, k: int) -> np.ndarray:
        """Uniforms on the open interval (0, 1); 0 and 1 cannot occur."""
        return (self._raw53(k).astype(np.float64) + 0.5) * 2.0**-53

    def ragged_uniform(self, counts) -> np.ndarray:
        """``counts[i]`` uniforms for replica ``i``, concatenated in replica order.

        Replica ``i`` receives the first ``counts[i]`` values its own stream
        would produce from the current position.  Afterwards the position is
        advanced past the longest request, so use a dedicated tag for ragged
        draws if the single-replica and batched paths must stay aligned.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (len(self.replicas),):
            raise ValueError("need one count per replica")
        nblocks = (counts + 1) // 2
        total = int(nblocks.sum())
        if total == 0:
            return np.empty(0)
        rep = np.repeat(self.replicas, nblocks)
        starts = np.repeat(np.cumsum(nblocks) - nblocks, nblocks)
        pos = (np.arange(total, dtype=np.int64) - starts + self.position).astype(np.uint64)
        self.position += int(nblocks.max())
        x0, x1, x2, x3 = philox4x32((pos & _MASK32, pos >> _SHIFT32,
                                     rep & _MASK32, rep >> _SHIFT32), self.key)
        a = (x0 << np.uint64(21)) ^ (x1 >> np.uint64(11))
        b = (x2 << np.uint64(21)) ^ (x3 >> np.uint64(11))
        bits = np.stack((a, b), axis=-1).reshape(-1) & np.uint64((1 << 53) - 1)
        # drop the unused second double of odd-length requests
        keep = np.ones(2 * total, dtype=bool)
        odd_last = (np.cumsum(nblocks) * 2 - 1)[counts % 2 == 1]
        keep[odd_last] = False
        return (bits[keep].astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, k: int) -> np.ndarray:
        return special.ndtri(self.uniform(k))

    def exponential(self, k: int) -> np.ndarray:
        return -np.log(self.uniform(k))

    def cauchy(self, k: int) -> np.ndarray:
        """Standard Cauchy by inverse CDF, tan(pi (u - 1/2))."""
        return cauchy_quantile(self.uniform(k))

    def signs(self, k: int) -> np.ndarray:
        return np.where(self.uniform(k) < 0.5, -1.0, 1.0)

    def poisson(self, lam: float) -> np.ndarray:
        """One Poisson(lam) count per replica, by inverse CDF."""
        u = self.uniform(1)[:, 0]
        return stats.poisson.ppf(u, lam).astype(np.int64)


class RngStream:
    """Single-replica view of a :class:`StreamBlock`; draws return 1-D arrays."""

    def __init__(self, seed: int, replica: int = 0, tag: str = "default"):
        self.block = StreamBlock(seed, [replica], tag)

    @property
    def seed(self) -> int:
        return self.block.seed

    @property
    def replica(self) -> int:
        return int(self.block.replicas[0])

    @property
    def tag(self) -> str:
        return self.block.tag

    def uniform(self, k: int) -> np.ndarray:
        return self.block.uniform(k)[0]

    def normal(self, k: int) -> np.ndarray:
        return self.block.normal(k)[0]

    def exponential(self, k: int) -> np.ndarray:
        return self.block.exponential(k)[0]

    def cauchy(self, k: int) -> np.ndarray:
        return self.block.cauchy(k)[0]

    def signs(self, k: int) -> np.ndarray:
        return self.block.signs(k)[0]

    def poisson(self, lam: float) -> int:
        return int(self.block.poisson(lam)[0])


def cauchy_quantile(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("Cauchy quantile needs u in the open interval (0, 1)")
    return np.tan(np.pi * (u - 0.5))


def as_block(stream) -> StreamBlock:
    return stream.block if isinstance(stream, RngStream) else stream

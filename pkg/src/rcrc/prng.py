"""Pinned, portable random number generation.

Every random quantity in the package (network weights, sparsity masks,
optimizer samples, environment worlds) comes from :class:`Stream`.  A stream
is a PCG64 bit generator seeded through numpy's ``SeedSequence``; uniforms are
formed from the raw 64-bit outputs as ``(raw >> 11) * 2**-53`` and normal
variates use the Box-Muller transform.  Because the raw PCG64 output and
SeedSequence hashing are frozen by numpy's stream-compatibility policy, and
the conversions are done here rather than by ``numpy.random.Generator``, a
seed reproduces the same numbers in any implementation that follows the same
recipe.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

PRNG_ID = "pcg64-seedsequence/u53/box-muller/v1"

_U53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1
_TOP_BIT = 1 << 63


class Stream:
    """Deterministic random stream."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self._bg = np.random.PCG64(int(seed))

    def raw(self, n: int) -> np.ndarray:
        return self._bg.random_raw(n)

    def uniform(self, size=None) -> np.ndarray | float:
        """Uniform doubles in [0, 1) with 53 bits of resolution."""
        if size is None:
            return float(self.uniform(1)[0])
        n = int(np.prod(size))
        u = (self._bg.random_raw(n) >> np.uint64(11)).astype(np.float64) * _U53
        return u.reshape(size)

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray | float:
        """Normal(0, scale**2) variates via Box-Muller.

        Pairs ``(u1, u2)`` are consumed in order; each pair yields
        ``r*cos(2*pi*u2)`` then ``r*sin(2*pi*u2)`` with
        ``r = sqrt(-2*log(1 - u1))``.  An odd request discards the last sine.
        """
        if size is None:
            return float(self.normal(1, scale)[0])
        n = int(np.prod(size))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        z = z.reshape(-1)[:n]
        if scale != 1.0:
            z = z * scale
        return z.reshape(size)

    def integers(self, high: int, size=None) -> np.ndarray | int:
        """Integers in ``[0, high)`` by ``floor(u * high)``."""
        if size is None:
            return int(self.integers(high, 1)[0])
        return np.floor(self.uniform(size) * high).astype(np.int64)

    def subset(self, population: int, k: int) -> np.ndarray:
        """Exactly ``k`` distinct indices of ``range(population)``, sorted.

        Draws one uniform key per index and keeps the ``k`` smallest (stable
        argsort, so ties resolve to the lower index).
        """
        if not 0 <= k <= population:
            raise ValueError(f"cannot choose {k} of {population}")
        keys = self.uniform(population)
        return np.sort(np.argsort(keys, kind="stable")[:k])

    @property
    def state(self) -> dict:
        return self._bg.state

    @state.setter
    def state(self, value: dict) -> None:
        self._bg.state = value


def derive_seed(namespace: str, *parts: int, tag_bit: bool = False) -> int:
    """Hash ``(namespace, parts...)`` to a 63-bit seed.

    The top bit of the returned 64-bit value equals ``tag_bit``, which lets
    callers carve the seed space into provably disjoint halves.
    """
    h = hashlib.blake2b(digest_size=8, person=b"rcrc-seed")
    h.update(namespace.encode("utf-8"))
    for p in parts:
        h.update(struct.pack("<Q", int(p) & _MASK64))
    value = int.from_bytes(h.digest(), "little") & (_TOP_BIT - 1)
    return value | _TOP_BIT if tag_bit else value

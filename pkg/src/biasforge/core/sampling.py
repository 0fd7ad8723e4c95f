"""Deterministic sampling primitives.

Every randomized operation in the toolkit draws from SplitMix64, a fixed
64-bit generator, so that identical seeds reproduce identical experiments
across platforms, Python versions, and releases. The algorithm is pinned
here and must not change without a major version bump:

  state    <- (state + 0x9E3779B97F4A7C15) mod 2^64
  z        <- state
  z        <- (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
  z        <- (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
  output   <- z XOR (z >> 31)

Bounded draws use rejection sampling (no modulo bias). Sub-seeds for
independent sampling streams are derived with FNV-1a over a text label.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes | str) -> int:
    """FNV-1a 64-bit hash; the toolkit's stable string hash."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(seed: int, label: str) -> int:
    """Derive an independent sub-seed for the stream named by `label`."""
    return (seed & _MASK64) ^ fnv1a64(label)


class SplitMix64:
    """The pinned deterministic generator (see module docstring)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SPLITMIX_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound), by rejection."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % bound

    def choice(self, pool: Sequence[T]) -> T:
        return pool[self.below(len(pool))]


def seeded_sample(pool: Sequence[T], k: int, seed: int) -> list[T]:
    """Sample k distinct elements from pool, reproducibly.

    Partial Fisher-Yates over the index array: position i swaps with a
    uniform position in [i, n). Identical (pool, k, seed) always yields
    the identical result.
    """
    n = len(pool)
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    if k > n:
        raise ValueError(f"cannot sample {k} items from a pool of {n}")
    rng = SplitMix64(seed)
    idx = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return [pool[idx[i]] for i in range(k)]


def seeded_shuffle(items: Sequence[T], seed: int) -> list[T]:
    """Full Fisher-Yates shuffle under the pinned generator."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1):
        j = i + rng.below(len(out) - i)
        out[i], out[j] = out[j], out[i]
    return out

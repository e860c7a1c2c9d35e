"""Deterministic random source for sampling and scenario generation.

xoshiro256** with splitmix64 seeding.  Implemented here rather than taken
from numpy so that every seeded stream is byte-identical across platforms
and library versions; scenario files and Monte-Carlo verdicts must replay
exactly.  Floats carry the usual 53-bit mantissa of the raw 64-bit word.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class SeededRng:
    """xoshiro256** stream seeded from a single integer via splitmix64."""

    __slots__ = ("_s", "seed")

    def __init__(self, seed: int):
        if not isinstance(seed, int):
            raise TypeError(f"seed must be an int, got {type(seed).__name__}")
        self.seed = seed
        state = seed & _MASK64
        words = []
        for _ in range(4):
            word, state = _splitmix64(state)
            words.append(word)
        if not any(words):  # the all-zero state is a fixed point of xoshiro
            words[0] = 0x9E3779B97F4A7C15
        self._s = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, low: float = -1.0, high: float = 1.0, size: int | None = None):
        """Uniform scalar (size=None) or 1-D array on [low, high)."""
        if size is None:
            return low + (high - low) * self.random()
        return np.array(
            [low + (high - low) * self.random() for _ in range(size)], dtype=float
        )

    def signs(self, size: int) -> np.ndarray:
        """Array of +/-1 drawn from the top bit of each word."""
        return np.array(
            [1.0 if (self.next_u64() >> 63) else -1.0 for _ in range(size)], dtype=float
        )

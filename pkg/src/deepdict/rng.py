"""Portable pseudorandom generator for synthetic fixtures.

The stream is fully specified so other implementations can reproduce it:

* seeding: ``state = splitmix64(seed)``, where splitmix64 adds
  ``0x9E3779B97F4A7C15`` to its input and mixes with
  ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``,
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``, ``z ^ (z >> 31)``.
  A zero result is replaced by ``0x9E3779B97F4A7C15``.
* step (xorshift64*): ``x ^= x >> 12; x ^= x << 25; x ^= x >> 27``,
  output ``x * 0x2545F4914F6CDD1D`` (all mod 2**64).
* uniform in [0, 1): ``(output >> 11) * 2**-53``.
* standard normal: Box-Muller cosine branch from two uniforms
  ``u1, u2``: ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.

Matrices are filled row-major.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int) -> int:
    z = (seed + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int = 0):
        self.state = splitmix64(int(seed) & _MASK) or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        n = int(np.prod(shape))
        vals = [low + (high - low) * self.random() for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)

    def normal(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        out = np.empty(n)
        for i in range(n):
            u1 = self.random()
            u2 = self.random()
            out[i] = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        return out.reshape(shape)

"""Deterministic random number generation for synthetic task families.

Families must be reproducible from a (seed, stream) pair alone, in any
language, so the generator is pinned down to the bit:

* state: xoshiro256**, seeded by running splitmix64 from the starting
  value ``(seed + stream * 0x9E3779B97F4A7C15) mod 2**64`` and taking
  four successive outputs as ``s[0..3]``
* uniforms: ``(next_u64() >> 11) * 2**-53``, i.e. 53-bit doubles in [0, 1)
* normals: Box-Muller on successive 53-bit uniforms, with
  ``u1 = ((next_u64() >> 11) + 1) * 2**-53`` in (0, 1] so the logarithm
  is always defined, then ``u2 = (next_u64() >> 11) * 2**-53``;
  ``z0 = sqrt(-2 ln u1) * cos(2 pi u2)`` is returned first and
  ``z1 = sqrt(-2 ln u1) * sin(2 pi u2)`` on the following call.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TO_UNIT = 2.0 ** -53


def splitmix64(x: int) -> tuple[int, int]:
    """Advance a splitmix64 state ``x`` once; returns (new_state, output)."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** keyed by (seed, stream); streams are independent."""

    def __init__(self, seed: int, stream: int = 0):
        x = (int(seed) + int(stream) * _GOLDEN) & _MASK64
        state = []
        for _ in range(4):
            x, out = splitmix64(x)
            state.append(out)
        self._s = state
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """One double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TO_UNIT

    def normal(self) -> float:
        """One standard normal variate (Box-Muller, pair cached)."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * _TO_UNIT
        u2 = (self.next_u64() >> 11) * _TO_UNIT
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(angle)
        return radius * math.cos(angle)

    def normals(self, shape: tuple[int, ...]) -> np.ndarray:
        """Array of standard normals, filled in row-major order."""
        count = int(np.prod(shape)) if shape else 1
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = self.normal()
        return out.reshape(shape)

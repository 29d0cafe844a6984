"""Deterministic 64-bit PRNG used for every stochastic draw in this package.

The generator is SplitMix64 (Steele, Lea & Vigna's splittable generator, as
published in Vigna's public-domain reference implementation).  It is chosen
because the entire algorithm is three constants and a handful of integer
operations, so it can be reproduced bit-for-bit in plain Python, vectorized
NumPy, and a JIT kernel alike.  State transition and output mix:

    state' = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state'
    z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

Derived draws are defined once, here, and everywhere else must match:

    bounded integer in [0, n):  next_u64() mod n
    float in [0, 1):            (next_u64() >> 11) * 2^-53

Because the state advance is a plain counter (+GAMMA per step), a block of n
outputs can be produced vectorized from ``state + GAMMA * [1..n]`` and is
bit-identical to n sequential calls.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB

_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53


def mix64(x: int) -> int:
    """SplitMix64 output mix of a single 64-bit value (also used to derive
    independent child seeds from a parent seed plus a stream index)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * MIX_MUL_1) & MASK64
    x = ((x ^ (x >> 27)) * MIX_MUL_2) & MASK64
    return x ^ (x >> 31)


class SplitMix64:
    """Stateful SplitMix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo mapping; the bias is n / 2^64."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        return self.next_u64() % n

    def next_float(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def next_array_u64(self, n: int) -> np.ndarray:
        """n outputs as a uint64 array, bit-identical to n next_u64() calls."""
        if n < 0:
            raise ValueError(f"count must be non-negative, got {n}")
        idx = np.arange(1, n + 1, dtype=np.uint64)
        s = np.uint64(self.state) + idx * np.uint64(GAMMA)
        z = (s ^ (s >> np.uint64(30))) * np.uint64(MIX_MUL_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MUL_2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GAMMA) & MASK64
        return z

    def next_array_float(self, n: int) -> np.ndarray:
        """n floats in [0, 1), bit-identical to n next_float() calls."""
        return (self.next_array_u64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53


def derive_seed(master: int, *stream: int) -> int:
    """Derive a child seed from a master seed and a stream index path.

    Defined as iterated mixing: mix64(master XOR mix64(index + 1)) applied per
    path component, so (master, i) and (master, j) give unrelated streams.
    """
    s = master & MASK64
    for part in stream:
        s = mix64(s ^ mix64((part + 1) & MASK64))
    return s

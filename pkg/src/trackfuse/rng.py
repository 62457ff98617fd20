"""Reproducible pseudo-random source for the simulator.

The sequential generator is xorshift64* with the 12/25/27 shift triple and
multiplier 2685821657736338717; a zero seed is remapped to the golden-gamma
constant because the xorshift state must never be zero. splitmix64 is used
to derive independent stream seeds. The first outputs for seed 1 are pinned
in a golden file under tests/.

Noise fields (one value per pixel) are counter-based so frames can be
generated independently and in parallel: element k of a field is the first
xorshift64* output of a stream seeded with splitmix64(field_seed + k).
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
XS_MULTIPLIER = 2685821657736338717
_U53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    x = (x + GOLDEN_GAMMA) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(seed: int, *tags: int) -> int:
    """Fold integer tags into a base seed, one splitmix64 round per tag."""
    s = seed & MASK64
    for t in tags:
        s = splitmix64((s ^ ((t * GOLDEN_GAMMA) & MASK64)) & MASK64)
    return s


class Xorshift64Star:
    """Sequential xorshift64* generator; also hands out uniforms and gaussians."""

    def __init__(self, seed: int):
        self._state = seed & MASK64
        if self._state == 0:
            self._state = GOLDEN_GAMMA
        self._spare: float | None = None

    def next_raw(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * XS_MULTIPLIER) & MASK64

    def uniform(self) -> float:
        """Uniform in [0, 1) from the top 53 bits of the next output."""
        return (self.next_raw() >> 11) * _U53

    def gaussian(self) -> float:
        """Standard normal via Box-Muller; pairs are cached, draws alternate cos/sin."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)


def _splitmix64_vec(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(GOLDEN_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _xs_output_vec(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = state ^ (state >> np.uint64(12))
    x = x ^ (x << np.uint64(25))
    x = x ^ (x >> np.uint64(27))
    return x, x * np.uint64(XS_MULTIPLIER)


def uniform_field(seed: int, count: int) -> np.ndarray:
    """count independent uniforms in [0, 1); element k comes from stream splitmix64(seed + k)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    base = np.uint64(seed & MASK64)
    states = _splitmix64_vec(base + np.arange(count, dtype=np.uint64))
    states[states == np.uint64(0)] = np.uint64(GOLDEN_GAMMA)
    _, out = _xs_output_vec(states)
    return (out >> np.uint64(11)).astype(np.float64) * _U53


def gaussian_field(seed: int, count: int) -> np.ndarray:
    """count independent standard normals, Box-Muller over two uniform fields."""
    u1 = 1.0 - uniform_field(derive_seed(seed, 1), count)
    u2 = uniform_field(derive_seed(seed, 2), count)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

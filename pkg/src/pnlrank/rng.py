"""Seed derivation and reproducible sampling streams.

Seed derivation uses splitmix64 with its standard published constants, so a
replication index maps to a child seed the same way in any language.  Sampling
itself runs on numpy's Philox counter-based generator keyed by the derived
seed; uniforms are drawn as (k + 0.5) / 2^53 over 53-bit integers (strictly
inside (0, 1)) and pushed through explicit inverse CDFs, keeping every draw a
pure function of (seed, parameters).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(seed: int, index: int) -> int:
    """index-th output of the splitmix64 sequence started at ``seed``."""
    z = (seed + (index + 1) * _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Stream:
    """Philox-backed uniform stream with inverse-CDF samplers."""

    def __init__(self, seed: int):
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    def random_open(self, size) -> np.ndarray:
        """Uniforms strictly inside (0, 1): (k + 0.5) / 2^53."""
        k = self._gen.integers(0, 1 << 53, size=size, dtype=np.uint64)
        return (k.astype(np.float64) + 0.5) / float(1 << 53)

    def uniform(self, lo: float, hi: float, size) -> np.ndarray:
        return lo + (hi - lo) * self.random_open(size)

    def gaussian(self, size) -> np.ndarray:
        return ndtri(self.random_open(size))

    def gumbel(self, size) -> np.ndarray:
        return -np.log(-np.log(self.random_open(size)))

    def logistic(self, size) -> np.ndarray:
        u = self.random_open(size)
        return np.log(u / (1.0 - u))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def substream(seed: int, index: int) -> Stream:
    return Stream(splitmix64(seed, index))

"""Counter-mode seed derivation.

seed_derive(master, index) feeds master + (index+1)*GOLDEN through the
SplitMix64 finalizer (Steele et al.), all mod 2^64:

    z  = master + (index + 1) * 0x9E3779B97F4A7C15
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

The pre-mix map is injective in the index for a fixed master and the
finalizer is a bijection of the 64-bit space, so derived seeds never collide
across indices. The recipe is arithmetic on unsigned 64-bit integers and
reproduces in any language.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX1) & _MASK
    z ^= z >> 27
    z = (z * _MIX2) & _MASK
    z ^= z >> 31
    return z


def seed_derive(master: int, index: int) -> int:
    """64-bit task seed, collision-free across indices for a fixed master."""
    return splitmix64((master + (index + 1) * _GOLDEN) & _MASK)


def derived_rng(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_derive(master, index)))

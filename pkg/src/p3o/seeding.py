"""Deterministic seed derivation.

Every random stream in a run is derived from one master seed and a string
label, so adding a new component (a new env instance, an extra critic)
never shifts the streams of existing components.

Derivation: ``child = splitmix64(master XOR fnv1a64(label))``.  The child
value seeds a ``numpy.random.Generator`` (PCG64).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def fnv1a64(label: str) -> int:
    """64-bit FNV-1a hash of a string label."""
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def splitmix64(x: int) -> int:
    """One splitmix64 output step for the given 64-bit state."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master: int, label: str) -> int:
    """Derive a child seed for `label` from the master seed."""
    return splitmix64((master & _MASK) ^ fnv1a64(label))


def derive_rng(master: int, label: str) -> np.random.Generator:
    """A PCG64 generator seeded by ``derive_seed(master, label)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, label)))

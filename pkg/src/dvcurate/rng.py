"""Deterministic seed derivation and substream construction.

All randomized operations in the package draw from numpy PCG64 generators
whose seeds are derived with splitmix64 from a user-supplied 64-bit seed and
an integer path (e.g. (seed, batch_index) or (seed, channel)).  PCG64 streams
are bit-reproducible across platforms, so any substream can be regenerated
out of order from its path alone.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 step: advance by the golden-ratio gamma and scramble."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, *path: int) -> int:
    """Mix a base seed with an integer path into a 64-bit substream seed.

    The rule is fixed: fold each path element into the state with xor, then
    scramble with splitmix64.  Distinct paths give independent substreams.
    """
    state = splitmix64(seed & _MASK64)
    for part in path:
        state = splitmix64(state ^ (part & _MASK64))
    return state


def substream(seed: int, *path: int) -> np.random.Generator:
    """A PCG64 generator for the substream identified by (seed, *path)."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *path)))

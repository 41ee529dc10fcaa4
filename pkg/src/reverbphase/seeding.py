"""Counter-based seed derivation.

Every stochastic object in the package is driven by an explicit 64-bit seed.
Ensemble member ``j`` of a run with master seed ``s`` uses ``derive_seed(s, j)``
so results never depend on evaluation order or chunking.
"""
import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One step of the SplitMix64 output function on a 64-bit integer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, index):
    """Mix ``master`` and ``index`` into an independent 64-bit child seed."""
    if master < 0 or index < 0:
        raise ValueError("seeds and indices must be non-negative")
    return splitmix64(splitmix64(master & MASK64) ^ (index & MASK64))


def generator(seed):
    """Return a numpy Generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def child_generator(master, index):
    return generator(derive_seed(master, index))

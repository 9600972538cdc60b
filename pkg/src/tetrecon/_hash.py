"""Counter-based random numbers (splitmix64) usable inside compiled kernels."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def uniform(key):
    """Uniform double in [0, 1) from a 64-bit key."""
    return (splitmix(key) >> np.uint64(11)) * (1.0 / 9007199254740992.0)

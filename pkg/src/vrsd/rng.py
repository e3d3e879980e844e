"""Portable seedable random stream.

Seeds are expanded with SplitMix64 and the stream itself is Marsaglia's
xorshift64* (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D, as published by
Vigna). Uniform indices use rejection sampling so there is no modulo bias.
The same arithmetic is mirrored inside the numba kernels, so a Python
``XorShift64Star`` seeded identically reproduces the kernels' index stream.
"""

import numpy as np
from numba import njit

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D


def splitmix64(seed):
    """Expand an integer seed into a non-zero 64-bit xorshift state."""
    z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return z or 0x9E3779B97F4A7C15


class XorShift64Star:
    """Pure-Python twin of the kernel generator."""

    def __init__(self, seed):
        self.state = splitmix64(seed)

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def randbelow(self, n):
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def state_array(self):
        return np.array([self.state], dtype=np.uint64)


def make_state(seed):
    """One-element uint64 array holding the kernel generator state."""
    return np.array([splitmix64(seed)], dtype=np.uint64)


@njit(cache=True, nogil=True)
def next_u64(state):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@njit(cache=True, nogil=True)
def randbelow(state, n):
    # 2**64 mod n computed as (2**64 - n) mod n to stay inside uint64
    nn = np.uint64(n)
    rem = (np.uint64(0) - nn) % nn
    limit = np.uint64(0) - rem
    while True:
        r = next_u64(state)
        if rem == np.uint64(0) or r < limit:
            return np.int64(r % nn)


@njit(cache=True, nogil=True)
def sample_mask(state, m, k, mask):
    """Mark k distinct positions of ``mask[:m]`` (Floyd's algorithm)."""
    for j in range(m):
        mask[j] = False
    if k >= m:
        for j in range(m):
            mask[j] = True
        return
    for j in range(m - k, m):
        t = randbelow(state, j + 1)
        if mask[t]:
            mask[j] = True
        else:
            mask[t] = True

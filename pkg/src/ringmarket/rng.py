"""Seedable xoshiro256** generator usable from numba kernels.

The generator state is a plain ``uint64[4]`` array so that it can be copied,
serialized into checkpoints and handed to compiled code without any hidden
global state. Seeding expands a 64-bit seed with splitmix64.
"""

import numpy as np
from numba import njit, uint64

MASK64 = (1 << 64) - 1

# splitmix64 constants (Steele, Lea & Flood 2014); frozen, seeds depend on them
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB

_kernel = njit(_nrt=False, cache=True)

_TWO_POW_M53 = 1.0 / 9007199254740992.0  # 2**-53
_INV_2P53_M1 = 1.0 / 9007199254740991.0  # 1 / (2**53 - 1)


def mix64(z: int) -> int:
    """splitmix64 finalizer; a bijection on 64-bit integers."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def seed_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into a xoshiro256** state with splitmix64."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    x = seed
    words = []
    for _ in range(4):
        x = (x + GOLDEN_GAMMA) & MASK64
        words.append(mix64(x))
    return np.array(words, dtype=np.uint64)


def derive_seed(master: int, run_index: int, sweep_index: int = 0) -> int:
    """Seed for run ``run_index`` at sweep point ``sweep_index``.

    ``key = sweep_index << 32 | run_index`` and the result is
    ``mix64(master ^ mix64(key))``. Both steps are bijections, so for a fixed
    master distinct ``(run_index, sweep_index)`` pairs below 2**32 never
    collide.
    """
    if not 0 <= run_index < 1 << 32 or not 0 <= sweep_index < 1 << 32:
        raise ValueError("run_index and sweep_index must lie in [0, 2**32)")
    key = (sweep_index << 32) | run_index
    return mix64((master & MASK64) ^ mix64(key))


@_kernel
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@_kernel
def next_u64(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@_kernel
def uniform01(s):
    """Uniform double on [0, 1)."""
    return float(next_u64(s) >> uint64(11)) * _TWO_POW_M53


@_kernel
def uniform_closed(s):
    """Uniform double on [0, 1], both ends attainable."""
    return float(next_u64(s) >> uint64(11)) * _INV_2P53_M1


@_kernel
def randbelow(s, n):
    """Unbiased integer in [0, n) by Lemire's multiply-and-reject method."""
    bound = uint64(n)
    # the rejection threshold (2**64 - n) % n is below n, so the costly
    # division is only needed when the low word falls under n
    threshold = uint64(0)
    have_threshold = False
    while True:
        x = next_u64(s)
        # 128-bit product split into 32-bit halves
        x_hi = x >> uint64(32)
        x_lo = x & uint64(0xFFFFFFFF)
        b_hi = bound >> uint64(32)
        b_lo = bound & uint64(0xFFFFFFFF)
        lo_lo = x_lo * b_lo
        hi_lo = x_hi * b_lo
        lo_hi = x_lo * b_hi
        hi_hi = x_hi * b_hi
        cross = (lo_lo >> uint64(32)) + (hi_lo & uint64(0xFFFFFFFF)) + lo_hi
        high = hi_hi + (hi_lo >> uint64(32)) + (cross >> uint64(32))
        low = (cross << uint64(32)) | (lo_lo & uint64(0xFFFFFFFF))
        if low >= bound:
            return np.int64(high)
        if not have_threshold:
            threshold = (uint64(0) - bound) % bound
            have_threshold = True
        if low >= threshold:
            return np.int64(high)


@_kernel
def bernoulli(s, p):
    """One draw; p=1 always succeeds and p=0 never does."""
    return uniform01(s) < p

"""Portable seeded random streams.

Two generators are used, both defined purely on 64-bit unsigned integer
arithmetic so that every platform produces the same bits:

* :class:`Xoshiro256StarStar` -- sequential generator (Blackman & Vigna's
  xoshiro256**), state seeded by four successive SplitMix64 outputs. Used
  where draws are inherently sequential, e.g. RANSAC sampling.
* :func:`counter_uniform` / :func:`counter_normal` -- counter-based draws:
  the value for ``(seed, stream, index)`` is the SplitMix64 finalizer applied
  to a mixed key. Rendering uses these so that per-pixel noise does not depend
  on evaluation order.

Floats are built from the top 53 bits: ``(x >> 11) * 2**-53`` in ``[0, 1)``.
"""

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state):
    """One SplitMix64 step; returns ``(new_state, output)``."""
    state = (state + GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    def __init__(self, seed):
        s = int(seed) & MASK64
        state = []
        for _ in range(4):
            s, out = splitmix64(s)
            state.append(out)
        self.s = state

    def next_u64(self):
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self):
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n):
        """Unbiased integer in ``[0, n)`` by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def sample(self, n, k):
        """``k`` distinct indices drawn uniformly from ``range(n)``, in draw order."""
        if k > n:
            raise ValueError("sample larger than population")
        chosen = []
        for i in range(k):
            r = self.randbelow(n - i)
            # map r onto the (n - i) indices not yet chosen, in increasing order
            for c in sorted(chosen):
                if r >= c:
                    r += 1
            chosen.append(r)
        return chosen


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def counter_u64(seed, stream, index):
    """Hash-based 64-bit draws for an array of ``index`` values."""
    _, key = splitmix64((int(seed) & MASK64) ^ ((int(stream) * GOLDEN) & MASK64))
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(idx * np.uint64(GOLDEN) + np.uint64(key))


def counter_uniform(seed, stream, index):
    """Uniform floats in ``[0, 1)``."""
    return (counter_u64(seed, stream, index) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def counter_normal(seed, stream, index):
    """Standard normal draws (Box-Muller on two counter streams)."""
    u1 = counter_uniform(seed, int(stream) | 1 << 40, index)
    u2 = counter_uniform(seed, int(stream) | 1 << 41, index)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

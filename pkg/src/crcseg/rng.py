"""Pinned pseudo-random primitives for reproducible shuffles.

The split machinery must produce the same permutation on every platform
and in every release, so it cannot lean on a library generator whose
stream is allowed to change. Two published algorithms are implemented
verbatim and frozen by test vectors:

* splitmix64 expands a 64-bit seed into initial state,
* xoshiro256** generates the 64-bit output stream.

Bounded draws use rejection sampling on the top of the 64-bit range, so
they are exactly uniform; the shuffle is the classic descending-index
exchange. See docs/FORMATS.md for the reference outputs.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Counter-based 64-bit generator, used here only for seed expansion."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** seeded from four successive splitmix64 outputs."""

    def __init__(self, seed: int):
        mix = SplitMix64(seed)
        self._s = [mix.next_u64() for _ in range(4)]
        if not any(self._s):
            # the all-zero state is the one fixed point; unreachable in
            # practice but guarded for safety
            self._s[0] = 1

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        limit = (2**64 // bound) * bound
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % bound


def fisher_yates(items, rng: Xoshiro256StarStar) -> list:
    """Return a shuffled copy: for i = n-1..1 swap i with rng.below(i+1)."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out

"""SplitMix64: the campaign's pinned PRNG.

Chosen over random.Random because the algorithm is tiny, named, and stable
across Python versions; every seeded draw in the harness must replay
bit-identically years later.
"""

from __future__ import annotations

_M64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _M64

    def next(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _M64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return (z ^ (z >> 31)) & _M64

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return self.next() % n


def mix_seed(seed: int, token: str) -> int:
    """Derive a per-unit seed from the campaign seed and a stable token."""
    h = seed & _M64
    for ch in token:
        h = ((h ^ ord(ch)) * 0x100000001B3) & _M64
    return h

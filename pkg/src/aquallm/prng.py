"""Deterministic sampling streams for injection decisions.

Algorithm (versioned, do not change without bumping): SplitMix64 over a
seed mixed with an FNV-1a-64 hash of a stable id string. Streams depend
only on (seed, id), never on iteration order or worker count.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

PRNG_ALGORITHM = "splitmix64-fnv1a64/v1"


def fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based 64-bit generator; a pure function of (seed, stream_id, step)."""

    def __init__(self, seed: int, stream_id: str = "") -> None:
        self._state = (seed ^ fnv1a64(stream_id)) & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & MASK64
        return _mix(self._state)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound

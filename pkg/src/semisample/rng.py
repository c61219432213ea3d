"""Deterministic random streams with explicit, caller-owned state.

Augmentation results must not depend on worker scheduling, so every frame
gets its own stream derived from a root seed plus string keys (typically
frame id and epoch). The generator is splitmix64 seeded through FNV-1a,
which is simple enough to reproduce exactly in other runtimes.
"""

from __future__ import annotations

import math

from .errors import InputError

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_INV_2_53 = 1.0 / (1 << 53)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def stream_key(*parts) -> str:
    """Canonical key string for a derived stream: parts joined with '|'."""
    return "|".join(str(p) for p in parts)


class DetRng:
    """splitmix64 generator; one instance per logical stream."""

    __slots__ = ("_state",)

    def __init__(self, state: int):
        self._state = state & _MASK64

    @classmethod
    def from_key(cls, *parts) -> "DetRng":
        """Derive an independent stream from a seed and arbitrary key parts."""
        return cls(fnv1a64(stream_key(*parts).encode("utf-8")))

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise InputError(f"randbelow requires n > 0, got {n}")
        v = int(self.random() * n)
        return n - 1 if v >= n else v

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """min(k, n) distinct indices from [0, n), drawn without replacement."""
        if k < 0:
            raise InputError(f"sample size must be >= 0, got {k}")
        idx = list(range(n))
        m = min(k, n)
        for i in range(m):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:m]

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian via Box-Muller; consumes exactly two uniforms."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, lam: float) -> int:
        """Poisson count via Knuth's product method; fine for small rates."""
        if lam < 0:
            raise InputError(f"poisson rate must be >= 0, got {lam}")
        if lam == 0:
            return 0
        limit = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.random()
            if p <= limit:
                return k
            k += 1

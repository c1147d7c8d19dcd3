"""Portable seeded pseudo-randomness based on the splitmix64 stream.

Every seeded decision in this package (fold tie-breaking, synthetic data,
weight init, batch shuffling, masking) draws from this generator so that a
64-bit seed fully reproduces a run, independent of platform or library
version.

Stream definition, for implementers of compatible tooling:

    state_i  = seed + (i + 1) * 0x9E3779B97F4A7C15      (mod 2^64)
    output_i = mix(state_i)

    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9  (mod 2^64)
            z ^= z >> 27; z *= 0x94D049BB133111EB  (mod 2^64)
            z ^= z >> 31

Derived quantities:
  * ``random()``      = (output >> 11) * 2**-53, a double in [0, 1)
  * ``randrange(n)``  = output mod n (the small modulo bias is irrelevant at
    the n used here and keeps the mapping trivially portable)
  * ``shuffle``       = Fisher-Yates from the last index down, one
    ``randrange(i + 1)`` per swap
  * child generators  = ``SplitMix64(mix(seed ^ fnv1a64(label)))``
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a hash, used to turn stream labels into seed offsets."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """Counter-based splitmix64 generator with a few convenience draws."""

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._count = 0

    @property
    def seed(self) -> int:
        return self._seed

    def derive(self, label: str | int) -> "SplitMix64":
        """Independent child stream for a named purpose; pure in (seed, label)."""
        if isinstance(label, int):
            label = str(label)
        return SplitMix64(_mix(self._seed ^ fnv1a64(label)))

    def next_u64(self) -> int:
        self._count += 1
        return _mix((self._seed + self._count * _GOLDEN) & _MASK64)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.next_u64() % n

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """First k entries of a shuffled range(n); k <= n."""
        if k > n:
            raise ValueError("sample size exceeds population")
        idx = list(range(n))
        self.shuffle(idx)
        return idx[:k]

    def uniform_array(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Vectorized batch of ``random()`` draws; same stream as scalar calls."""
        counts = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = np.uint64(self._seed) + counts * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

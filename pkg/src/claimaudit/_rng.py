"""Portable deterministic hashing and pseudo-randomness.

Everything that must be byte-reproducible across platforms (the mock
auditor, the flawed-audit simulator, the hash embedder, the mock LLM)
draws from these primitives instead of Python's or numpy's RNG streams.
All arithmetic is 64-bit integer math, so the outputs depend only on
the input bytes, never on interpreter or library versions.
"""

from __future__ import annotations

from typing import Iterable, Sequence, TypeVar

_MASK64 = 0xFFFFFFFFFFFFFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

T = TypeVar("T")


def fnv1a64(data: bytes | str) -> int:
    """64-bit FNV-1a hash over UTF-8 bytes."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _splitmix64(state: int) -> tuple[int, int]:
    # Sebastiano Vigna's splitmix64; one step returns (new_state, output).
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class DeterministicStream:
    """A seedable stream of portable pseudo-random draws.

    Seeded from any mix of integers and strings; strings are folded in
    through FNV-1a so (seed, claim text, paper id) tuples produce stable
    streams regardless of platform.
    """

    def __init__(self, *seeds: int | str) -> None:
        state = _FNV_OFFSET
        for seed in seeds:
            part = seed & _MASK64 if isinstance(seed, int) else fnv1a64(seed)
            # Fold each part in with one mixing round so order matters.
            state, out = _splitmix64(state ^ part)
            state ^= out
        self._state = state

    def next_u64(self) -> int:
        self._state, out = _splitmix64(self._state)
        return out

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        # Rejection sampling to avoid modulo bias.
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % span)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return lo + (draw % span)

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("cannot choose from an empty sequence")
        return items[self.randint(0, len(items) - 1)]

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """k distinct items via a partial Fisher-Yates shuffle."""
        if k > len(items):
            raise ValueError(f"sample size {k} exceeds population {len(items)}")
        pool = list(items)
        for i in range(k):
            j = self.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def weighted_choice(self, items: Iterable[tuple[T, float]]) -> T:
        pairs = list(items)
        total = sum(weight for _, weight in pairs)
        if total <= 0:
            raise ValueError("weights must sum to a positive value")
        point = self.random() * total
        acc = 0.0
        for item, weight in pairs:
            acc += weight
            if point < acc:
                return item
        return pairs[-1][0]

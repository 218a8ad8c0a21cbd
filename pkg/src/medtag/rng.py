"""Deterministic random primitives.

All randomness in the toolkit (fold assignment, training order, weight
search) flows through one explicitly specified generator, SplitMix64, so
that results are reproducible from a single 64-bit seed and do not depend
on the internals of any host-language RNG.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class SplitMix64:
    """SplitMix64: 64-bit add-and-mix generator.

    State advances by the golden-ratio increment; output is the standard
    two-round multiply-xorshift finalizer. Full period 2**64.
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError(f"below() requires n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this generator."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, purpose: str) -> int:
    """Derive a per-purpose 64-bit sub-seed from one run seed.

    The purpose tag is hashed with FNV-1a, xored into the seed, and
    scrambled once through SplitMix64, so distinct purposes ("folds",
    "train-fold0", ...) yield independent deterministic streams.
    """
    h = _FNV_OFFSET
    for byte in purpose.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return SplitMix64(seed ^ h).next_u64()

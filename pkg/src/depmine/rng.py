"""Deterministic, splittable random streams.

Seeds are folded into a 64-bit key with the splitmix64 finalizer and the key
feeds a Philox counter-based bit generator, so the same (seed, path) yields
the same draws on every platform. Streams are split by path tokens (ints or
strings), never by drawing from the parent, which keeps parallel consumers
independent of scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _token_to_int(token) -> int:
    if isinstance(token, str):
        return int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
    if isinstance(token, (int, np.integer)):
        return int(token) & _MASK64
    raise TypeError(f"stream path tokens must be int or str, got {type(token)!r}")


def derive_key(seed: int, *path) -> int:
    """Fold a seed and a path of tokens into one 64-bit Philox key."""
    key = _splitmix64(int(seed) & _MASK64)
    for token in path:
        key = _splitmix64(key ^ _token_to_int(token))
    return key


class Stream:
    """A named random stream: `gen` is a numpy Generator over Philox."""

    __slots__ = ("key", "gen")

    def __init__(self, key: int):
        self.key = key & _MASK64
        self.gen = np.random.Generator(np.random.Philox(key=self.key))

    @classmethod
    def from_seed(cls, seed: int, *path) -> "Stream":
        return cls(derive_key(seed, *path))

    def split(self, *path) -> "Stream":
        """Child stream at `path`; independent of draws made on the parent."""
        return Stream(derive_key(self.key, *path))

    # Thin pass-throughs for the most common draws.
    def random(self, size=None):
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def choice(self, a, size=None, replace=True, p=None):
        return self.gen.choice(a, size=size, replace=replace, p=p)

    def dirichlet(self, alpha, size=None):
        return self.gen.dirichlet(alpha, size)

    def __repr__(self):
        return f"Stream(key=0x{self.key:016x})"

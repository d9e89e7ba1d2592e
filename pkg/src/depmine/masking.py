"""Mask distributions: uniform, cloze, no-cloze, and the final-word mixture.

Uniform masks each position independently; the other three strategies mask
exactly one position per sentence. Every strategy is immutable, so a single
instance is safe to share across workers that each own a random stream.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import MASK_ID, Lexicon, Sentence
from .errors import ConfigError
from .rng import Stream


@dataclass(frozen=True)
class Uniform:
    rate: float = 0.15

    def __post_init__(self):
        if not (0.0 < self.rate < 1.0):
            raise ConfigError("uniform mask rate must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class Cloze:
    lexicon: Lexicon


@dataclass(frozen=True)
class NoCloze:
    lexicon: Lexicon


@dataclass(frozen=True)
class MixtureP:
    """Mask the final position p% of the time, a uniform non-final one otherwise."""

    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 100.0):
            raise ConfigError("mixture percentage must lie in [0, 100]")


MaskStrategy = Uniform | Cloze | NoCloze | MixtureP


@dataclass
class MaskStats:
    """Counters a training loop can pass in to observe fallback behavior."""

    draws: int = 0
    fallbacks: int = 0


def sample_mask(strategy: MaskStrategy, sentence: Sentence, stream: Stream,
                stats: MaskStats | None = None) -> frozenset:
    """Draw the set of positions to mask for one sentence."""
    n = len(sentence)
    if n == 0:
        raise ConfigError("cannot mask an empty sentence")
    if stats is not None:
        stats.draws += 1

    if isinstance(strategy, Uniform):
        draws = stream.random(n)
        positions = frozenset(int(i) for i in range(n) if draws[i] < strategy.rate)
        if not positions:
            if stats is not None:
                stats.fallbacks += 1
            positions = frozenset({int(stream.integers(n))})
        return positions

    if isinstance(strategy, (Cloze, NoCloze)):
        in_lex = isinstance(strategy, Cloze)
        eligible = [i for i, t in enumerate(sentence.ids) if (t in strategy.lexicon) == in_lex]
        if not eligible:
            if stats is not None:
                stats.fallbacks += 1
            return frozenset({int(stream.integers(n))})
        return frozenset({eligible[int(stream.integers(len(eligible)))]})

    if isinstance(strategy, MixtureP):
        if n == 1 or stream.random() < strategy.p / 100.0:
            return frozenset({n - 1})
        return frozenset({int(stream.integers(n - 1))})

    raise TypeError(f"unknown mask strategy {strategy!r}")


def apply_mask(sentence: Sentence, positions, mask_id: int = MASK_ID) -> Sentence:
    """Copy of the sentence with the given positions replaced by MASK."""
    n = len(sentence)
    ids = list(sentence.ids)
    for p in positions:
        if not (0 <= p < n):
            raise ConfigError(f"mask position {p} outside sentence of length {n}")
        ids[p] = mask_id
    return sentence.with_ids(ids)


def parse_strategy(text: str, vocab=None, lexicon_path_loader=None) -> MaskStrategy:
    """Parse CLI strategy specs: uniform:0.15 | cloze:<file> | nocloze:<file> | mixture:<p>."""
    from . import corpus as corpus_mod

    kind, _, arg = text.partition(":")
    kind = kind.lower()
    if kind == "uniform":
        return Uniform(rate=float(arg) if arg else 0.15)
    if kind == "mixture":
        return MixtureP(p=float(arg))
    if kind in ("cloze", "nocloze"):
        if not arg:
            raise ConfigError(f"{kind} strategy needs a lexicon file: {kind}:<path>")
        if vocab is None:
            raise ConfigError(f"{kind} strategy needs a vocab to resolve the lexicon")
        loader = lexicon_path_loader or corpus_mod.load_lexicon
        lexicon, _dropped = loader(arg, vocab)
        return Cloze(lexicon) if kind == "cloze" else NoCloze(lexicon)
    raise ConfigError(f"unknown mask strategy {text!r}")

import numpy as np
import pytest

from depmine.corpus import Lexicon, build_vocab
from depmine.errors import ConfigError
from depmine.masking import (
    Cloze,
    MaskStats,
    MixtureP,
    NoCloze,
    Uniform,
    apply_mask,
    parse_strategy,
    sample_mask,
)
from depmine.rng import Stream

from conftest import ids_sentence


def test_uniform_rate_validation():
    with pytest.raises(ConfigError):
        Uniform(rate=0.0)
    with pytest.raises(ConfigError):
        Uniform(rate=1.0)


def test_uniform_single_token_always_masked(stream):
    sent = ids_sentence([5])
    for _ in range(50):
        assert sample_mask(Uniform(0.15), sent, stream) == frozenset({0})


def test_uniform_marginals_and_fallback_rate():
    # Per-position frequency within rate +- 0.01 once the sentence is long
    # enough that the zero-mask fallback almost never fires (0.85^45 < 1e-3).
    n, rate, draws = 45, 0.15, 100_000
    sent = ids_sentence(list(range(4, 4 + n)))
    stream = Stream.from_seed(77)
    stats = MaskStats()
    counts = np.zeros(n)
    for _ in range(draws):
        for p in sample_mask(Uniform(rate), sent, stream, stats):
            counts[p] += 1
    assert stats.fallbacks / stats.draws < 0.001
    freqs = counts / draws
    assert np.abs(freqs - rate).max() < 0.01


def test_cloze_masks_only_lexicon(stream):
    lex = Lexicon(ids=frozenset({9}), name="t")
    sent = ids_sentence([4, 5, 6, 9, 7])
    for _ in range(25):
        assert sample_mask(Cloze(lex), sent, stream) == frozenset({3})


def test_cloze_nocloze_respect_eligibility(stream):
    lex = Lexicon(ids=frozenset({9, 6}), name="t")
    sent = ids_sentence([4, 9, 6, 5, 9, 8])
    for _ in range(200):
        (c,) = sample_mask(Cloze(lex), sent, stream)
        assert sent.ids[c] in lex
        (n,) = sample_mask(NoCloze(lex), sent, stream)
        assert sent.ids[n] not in lex


def test_cloze_fallback_counts(stream):
    lex = Lexicon(ids=frozenset({99}), name="t")
    sent = ids_sentence([4, 5])
    stats = MaskStats()
    out = sample_mask(Cloze(lex), sent, stream, stats)
    assert len(out) == 1 and stats.fallbacks == 1


def test_mixture_degenerate_ends(stream):
    sent = ids_sentence([4, 5, 6, 7])
    for _ in range(300):
        assert sample_mask(MixtureP(100.0), sent, stream) == frozenset({3})
    for _ in range(300):
        (p,) = sample_mask(MixtureP(0.0), sent, stream)
        assert p != 3


def test_mixture_frequency(stream):
    sent = ids_sentence([4, 5, 6, 7, 8])
    hits = sum(
        sample_mask(MixtureP(40.0), sent, stream) == frozenset({4})
        for _ in range(20_000)
    )
    assert abs(hits / 20_000 - 0.4) < 0.02


def test_apply_mask_basics():
    sent = ids_sentence([4, 5, 6])
    same = apply_mask(sent, frozenset())
    assert same.ids == sent.ids and same is not sent
    masked = apply_mask(sent, {1})
    assert masked.ids[1] == 1 and masked.ids[0] == 4
    assert sent.ids[1] == 5  # original untouched
    assert masked.word_map == sent.word_map and len(masked) == len(sent)


def test_apply_mask_commutes():
    sent = ids_sentence([4, 5, 6, 7])
    a = apply_mask(apply_mask(sent, {1}), {3})
    b = apply_mask(sent, {1, 3})
    assert a.ids == b.ids


def test_apply_mask_range_check():
    with pytest.raises(ConfigError):
        apply_mask(ids_sentence([4, 5]), {2})


def test_parse_strategy_specs(tmp_path):
    v = build_vocab(["good bad plain"], min_count=1)
    assert parse_strategy("uniform:0.2") == Uniform(rate=0.2)
    assert parse_strategy("mixture:35") == MixtureP(p=35.0)
    lexfile = tmp_path / "lex.txt"
    lexfile.write_text("good\nbad\n", encoding="utf-8")
    strat = parse_strategy(f"cloze:{lexfile}", vocab=v)
    assert isinstance(strat, Cloze) and len(strat.lexicon) == 2
    with pytest.raises(ConfigError):
        parse_strategy("span:3")

import numpy as np
import pytest

from depmine.corpus import Sentence, Vocab
from depmine.model import ModelDims, TinyMLM
from depmine.rng import Stream


def ids_sentence(ids, word_map=None):
    """Sentence wrapper for raw id tuples (oracle/table worlds)."""
    ids = tuple(int(i) for i in ids)
    if word_map is None:
        word_map = tuple(range(len(ids)))
    return Sentence(ids=ids, surface=tuple(str(i) for i in ids), word_map=tuple(word_map))


def tiny_vocab(n_words=8):
    return Vocab.from_words([f"w{k}" for k in range(n_words)])


def tiny_model(vocab_size=12, max_len=8, hidden=12, heads=2, ffn=10, layers=2, seed=7):
    dims = ModelDims(vocab_size=vocab_size, max_len=max_len, layers=layers,
                     hidden=hidden, heads=heads, ffn=ffn)
    return TinyMLM.init(dims, Stream.from_seed(seed, "test-model"))


@pytest.fixture
def stream():
    return Stream.from_seed(1234)


class StubModel:
    """Fixed-distribution model: same conditional at every position."""

    def __init__(self, probs, mask_id=None):
        self.probs = np.asarray(probs, dtype=float)
        self.probs = self.probs / self.probs.sum()
        self.mask_id = len(self.probs) if mask_id is None else mask_id

    def masked_conditional(self, ids, pos):
        return self.probs.copy()

    def masked_conditional_batch(self, id_seqs, positions):
        return np.tile(self.probs, (len(id_seqs), 1))

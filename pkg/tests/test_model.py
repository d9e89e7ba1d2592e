import numpy as np
import pytest

from depmine.corpus import build_vocab
from depmine.errors import ConfigError
from depmine.model import (
    ModelDims,
    TinyMLM,
    encode_batch,
    load_checkpoint,
    mlm_loss_and_grad,
    save_checkpoint,
)
from depmine.rng import Stream

from conftest import ids_sentence, tiny_model


def test_forward_mlm_rows_normalized():
    model = tiny_model(vocab_size=20, max_len=10)
    sent = ids_sentence([4, 8, 12, 1, 9])
    probs = model.forward_mlm(sent)
    assert probs.shape == (5, 20)
    assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9


def test_fresh_model_near_uniform():
    # Tied random embeddings with zero output bias: no token should take
    # more than 5x the uniform share at any position.
    model = tiny_model(vocab_size=60, max_len=12, hidden=64, heads=2, ffn=64, seed=3)
    sent = ids_sentence(list(range(4, 14)))
    probs = model.forward_mlm(sent)
    assert probs.max() < 5.0 / 60


def test_pad_does_not_leak_into_real_positions():
    model = tiny_model(vocab_size=16, max_len=12)
    seq = [4, 5, 6, 7]
    short, short_real = encode_batch([seq], model.dims.max_len)
    padded = np.full((1, 9), model.pad_id, dtype=np.int64)
    padded[0, : len(seq) + 1] = short[0]
    padded_real = np.zeros((1, 9), dtype=bool)
    padded_real[0, : len(seq) + 1] = True
    xa, _ = model.forward_hidden(short, short_real)
    xb, _ = model.forward_hidden(padded, padded_real)
    assert np.allclose(xa[0], xb[0, : len(seq) + 1], atol=1e-12)


def test_position_permutation_equivariance():
    # Permuting input positions together with the positional-embedding rows
    # (CLS slot fixed) leaves the masked-target loss unchanged.
    model = tiny_model(vocab_size=16, max_len=8)
    seq = [4, 5, 6, 7, 8]
    perm = [2, 0, 4, 1, 3]
    ids, real = encode_batch([seq], model.dims.max_len)
    tmask = np.zeros_like(real)
    tids = np.zeros_like(ids)
    tmask[0, 2] = True
    tids[0, 2] = ids[0, 2]
    ids[0, 2] = model.mask_id
    loss_a, _ = model.mlm_loss_and_grad(ids, real, tmask, tids)

    permuted = model.clone()
    rows = [0] + [p + 1 for p in perm]
    permuted.params["pos"][: len(rows)] = model.params["pos"][rows]
    new_ids = ids.copy()
    new_tmask = np.zeros_like(tmask)
    new_tids = np.zeros_like(tids)
    for new_pos, old_pos in enumerate(perm):
        new_ids[0, new_pos + 1] = ids[0, old_pos + 1]
        if tmask[0, old_pos + 1]:
            new_tmask[0, new_pos + 1] = True
            new_tids[0, new_pos + 1] = tids[0, old_pos + 1]
    loss_b, _ = permuted.mlm_loss_and_grad(new_ids, real, new_tmask, new_tids)
    assert abs(loss_a - loss_b) < 1e-12


def test_rigged_one_hot_loss_vanishes():
    model = tiny_model(vocab_size=10, max_len=6)
    model.params["out_b"][7] = 200.0
    items = [(ids_sentence([1, 5, 6]), {0: 7})]
    loss, _ = mlm_loss_and_grad(model, items)
    assert loss < 1e-6


def test_uniform_model_loss_is_log_vocab():
    model = tiny_model(vocab_size=12, max_len=6)
    model.params["emb"][:] = 0.0
    items = [(ids_sentence([1, 5, 6]), {0: 7})]
    loss, _ = mlm_loss_and_grad(model, items)
    assert abs(loss - np.log(12)) < 1e-12


def test_length_overflow_raises():
    model = tiny_model(vocab_size=10, max_len=4)
    with pytest.raises(ConfigError):
        model.forward_mlm(ids_sentence([4, 5, 6, 7]))


def test_target_at_unmasked_position_raises():
    model = tiny_model(vocab_size=10, max_len=6)
    items = [(ids_sentence([4, 5, 6]), {0: 7})]  # position 0 not masked
    with pytest.raises(ConfigError):
        mlm_loss_and_grad(model, items)


def test_masked_conditional_excludes_specials():
    model = tiny_model(vocab_size=14, max_len=8)
    probs = model.masked_conditional([4, 1, 6], 1)
    assert probs[:4].sum() == 0.0
    assert abs(probs.sum() - 1.0) < 1e-12


def test_checkpoint_round_trip(tmp_path):
    vocab = build_vocab(["a b c d e f g h"], min_count=1)
    model = tiny_model(vocab_size=len(vocab), max_len=8)
    path = tmp_path / "m.bin"
    save_checkpoint(model, vocab, path)
    back = load_checkpoint(path, vocab)
    assert back.dims == model.dims
    for name, tensor in model.params.items():
        assert (back.params[name] == tensor).all()


def test_checkpoint_vocab_hash_mismatch(tmp_path):
    vocab = build_vocab(["a b c d e f g h"], min_count=1)
    other = build_vocab(["a b c d e f g x"], min_count=1)
    model = tiny_model(vocab_size=len(vocab), max_len=8)
    path = tmp_path / "m.bin"
    save_checkpoint(model, vocab, path)
    with pytest.raises(ConfigError):
        load_checkpoint(path, other)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ConfigError):
        load_checkpoint(path)

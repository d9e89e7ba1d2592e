"""Backprop verification against central finite differences.

The reduced model keeps every-coordinate checks fast; the acceptance suite
re-runs the same check at the full published dimensions with coordinate
subsampling.
"""

import numpy as np
import pytest

from depmine.model import encode_batch, param_names
from depmine.rng import Stream
from depmine.training import ClassifierHead, _cls_loss_and_grad

from conftest import tiny_model

H_FD = 1e-5
# Relative error with the denominator floored at 1e-3: coordinates below the
# floor are held to an absolute 1e-7, which still dwarfs the FD noise floor.
REL_TOL = 1e-4


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-3)


def _random_mlm_batch(model, stream, batch=2, max_tokens=5):
    v = model.dims.vocab_size
    seqs = []
    for _ in range(batch):
        n = int(stream.integers(2, max_tokens + 1))
        seqs.append([int(t) for t in stream.integers(4, v, size=n)])
    ids, real = encode_batch(seqs, model.dims.max_len)
    tmask = np.zeros_like(real)
    tids = np.zeros_like(ids)
    for r, seq in enumerate(seqs):
        k = 1 + int(stream.integers(len(seq)))
        tmask[r, k] = True
        tids[r, k] = ids[r, k]
        ids[r, k] = model.mask_id
    return ids, real, tmask, tids


def test_mlm_gradients_every_coordinate():
    model = tiny_model(vocab_size=9, max_len=8, hidden=12, heads=2, ffn=10, seed=7)
    stream = Stream.from_seed(3, "grad-batch")
    ids, real, tmask, tids = _random_mlm_batch(model, stream)
    _, grads = model.mlm_loss_and_grad(ids, real, tmask, tids)

    worst = 0.0
    for name in param_names(model.dims.layers):
        p = model.params[name]
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + H_FD
            up, _ = model.mlm_loss_and_grad(ids, real, tmask, tids)
            p[idx] = old - H_FD
            dn, _ = model.mlm_loss_and_grad(ids, real, tmask, tids)
            p[idx] = old
            fd = (up - dn) / (2 * H_FD)
            worst = max(worst, rel_err(fd, grads[name][idx]))
    assert worst < REL_TOL


def test_classifier_gradients_every_coordinate():
    model = tiny_model(vocab_size=9, max_len=8, hidden=12, heads=2, ffn=10, seed=11)
    head = ClassifierHead.init(model.dims.hidden, 3, Stream.from_seed(5))
    seqs = [[4, 5, 6, 7], [8, 6]]
    labels = np.array([0, 2])
    _, theta_grads, dw, db = _cls_loss_and_grad(model, head, seqs, labels)

    def loss():
        return _cls_loss_and_grad(model, head, seqs, labels)[0]

    worst = 0.0
    for name in param_names(model.dims.layers):
        p = model.params[name]
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + H_FD
            up = loss()
            p[idx] = old - H_FD
            dn = loss()
            p[idx] = old
            worst = max(worst, rel_err((up - dn) / (2 * H_FD), theta_grads[name][idx]))
    for arr, grad in ((head.w, dw), (head.b, db)):
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + H_FD
            up = loss()
            arr[idx] = old - H_FD
            dn = loss()
            arr[idx] = old
            worst = max(worst, rel_err((up - dn) / (2 * H_FD), grad[idx]))
    assert worst < REL_TOL


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mlm_gradients_random_batches_sampled_coords(seed):
    # Property-style repetition at other seeds, sampling coordinates.
    model = tiny_model(vocab_size=11, max_len=8, hidden=12, heads=2, ffn=10, seed=seed)
    stream = Stream.from_seed(seed, "grad-prop")
    ids, real, tmask, tids = _random_mlm_batch(model, stream, batch=3)
    _, grads = model.mlm_loss_and_grad(ids, real, tmask, tids)
    worst = 0.0
    for name in param_names(model.dims.layers):
        p = model.params[name]
        flat = p.reshape(-1)
        picks = stream.integers(0, flat.size, size=min(10, flat.size))
        for k in picks:
            old = flat[k]
            flat[k] = old + H_FD
            up, _ = model.mlm_loss_and_grad(ids, real, tmask, tids)
            flat[k] = old - H_FD
            dn, _ = model.mlm_loss_and_grad(ids, real, tmask, tids)
            flat[k] = old
            worst = max(worst, rel_err((up - dn) / (2 * H_FD), grads[name].reshape(-1)[k]))
    assert worst < REL_TOL

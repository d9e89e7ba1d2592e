"""Tiny transformer encoder with hand-written backpropagation.

Two post-norm encoder layers (BERT layout: residual then layernorm), learned
positional embeddings, token embeddings tied to the output projection, GELU
MLP, no dropout, f64 throughout. The fixed architecture keeps the backward
pass small enough to verify coordinate-by-coordinate against central finite
differences.

Shapes: batches are (B, T) id arrays where position 0 is the CLS slot and
the tail is PAD; hidden states are (B, T, H). Attention masks PAD keys with
a -1e30 additive bias, so PAD never influences real positions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .corpus import CLS_ID, MASK_ID, PAD_ID, SPECIAL_TOKENS, Vocab
from .errors import ConfigError
from .rng import Stream

_NEG = -1e30  # additive attention bias for PAD keys
_LN_EPS = 1e-12
_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    max_len: int  # maximum input positions, including the leading CLS slot
    layers: int = 2
    hidden: int = 64
    heads: int = 2
    ffn: int = 64

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise ConfigError("hidden size must divide evenly into heads")
        if min(self.vocab_size, self.max_len, self.layers, self.hidden, self.heads, self.ffn) < 1:
            raise ConfigError("all model dimensions must be >= 1")


_LAYER_PARAMS = ("wq", "wk", "wv", "wo", "w1", "w2", "ln1_g", "ln1_b", "ln2_g", "ln2_b")


def param_names(layers: int):
    names = ["emb", "pos", "out_b"]
    for i in range(layers):
        names.extend(f"l{i}.{p}" for p in _LAYER_PARAMS)
    return names


def _param_shape(name: str, d: ModelDims):
    base = {
        "emb": (d.vocab_size, d.hidden),
        "pos": (d.max_len, d.hidden),
        "out_b": (d.vocab_size,),
    }
    if name in base:
        return base[name]
    p = name.split(".", 1)[1]
    return {
        "wq": (d.hidden, d.hidden),
        "wk": (d.hidden, d.hidden),
        "wv": (d.hidden, d.hidden),
        "wo": (d.hidden, d.hidden),
        "w1": (d.hidden, d.ffn),
        "w2": (d.ffn, d.hidden),
        "ln1_g": (d.hidden,),
        "ln1_b": (d.hidden,),
        "ln2_g": (d.hidden,),
        "ln2_b": (d.hidden,),
    }[p]


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT2PI


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layernorm_bwd(dout, g, cache):
    xhat, inv = cache
    dg = (dout * xhat).sum(axis=(0, 1))
    db = dout.sum(axis=(0, 1))
    dxhat = dout * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _split_heads(x, heads):
    b, t, h = x.shape
    return x.reshape(b, t, heads, h // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, nh, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, nh * dh)


class TinyMLM:
    """Masked language model p(x_i | context) over a shared vocab."""

    def __init__(self, dims: ModelDims, params: dict):
        self.dims = dims
        self.params = params
        self.mask_id = MASK_ID
        self.pad_id = PAD_ID
        self.cls_id = CLS_ID

    @classmethod
    def init(cls, dims: ModelDims, stream: Stream, scale: float = 0.02) -> "TinyMLM":
        params = {}
        for name in param_names(dims.layers):
            shape = _param_shape(name, dims)
            if name == "out_b" or name.endswith("_b"):
                params[name] = np.zeros(shape)
            elif name.endswith("_g"):
                params[name] = np.ones(shape)
            else:
                params[name] = stream.normal(0.0, scale, shape)
        return cls(dims, params)

    def clone(self) -> "TinyMLM":
        return TinyMLM(self.dims, {k: v.copy() for k, v in self.params.items()})

    # -- forward -----------------------------------------------------------

    def forward_hidden(self, ids, real):
        """Run the encoder stack. ids, real: (B, T). Returns (x_final, cache)."""
        p = self.params
        d = self.dims
        b, t = ids.shape
        if t > d.max_len:
            raise ConfigError(f"input length {t} exceeds max_len {d.max_len}")
        kbias = np.where(real[:, None, None, :], 0.0, _NEG)  # (B,1,1,T)
        scale = 1.0 / np.sqrt(d.hidden // d.heads)

        x = p["emb"][ids] + p["pos"][:t]
        cache = {"ids": ids, "real": real, "x0": x, "layers": []}
        for i in range(d.layers):
            lp = f"l{i}."
            x_in = x
            q = x @ p[lp + "wq"]
            k = x @ p[lp + "wk"]
            v = x @ p[lp + "wv"]
            qh, kh, vh = (_split_heads(a, d.heads) for a in (q, k, v))
            scores = qh @ kh.transpose(0, 1, 3, 2) * scale + kbias
            smax = scores.max(axis=-1, keepdims=True)
            ez = np.exp(scores - smax)
            attn = ez / ez.sum(axis=-1, keepdims=True)
            ctx = _merge_heads(attn @ vh)
            y1 = x_in + ctx @ p[lp + "wo"]
            x1, ln1c = _layernorm(y1, p[lp + "ln1_g"], p[lp + "ln1_b"])
            pre = x1 @ p[lp + "w1"]
            act = _gelu(pre)
            y2 = x1 + act @ p[lp + "w2"]
            x, ln2c = _layernorm(y2, p[lp + "ln2_g"], p[lp + "ln2_b"])
            cache["layers"].append(
                {"x_in": x_in, "qh": qh, "kh": kh, "vh": vh, "attn": attn,
                 "ctx": ctx, "ln1c": ln1c, "x1": x1, "pre": pre, "act": act,
                 "ln2c": ln2c}
            )
        cache["xf"] = x
        return x, cache

    def backward_hidden(self, cache, dxf):
        """Backprop dL/dx_final through the stack into parameter grads."""
        p = self.params
        d = self.dims
        scale = 1.0 / np.sqrt(d.hidden // d.heads)
        grads = {name: np.zeros_like(p[name]) for name in param_names(d.layers)}

        dx = dxf
        for i in reversed(range(d.layers)):
            lp = f"l{i}."
            lc = cache["layers"][i]
            dy2, dg2, db2 = _layernorm_bwd(dx, p[lp + "ln2_g"], lc["ln2c"])
            grads[lp + "ln2_g"] += dg2
            grads[lp + "ln2_b"] += db2
            # y2 = x1 + gelu(x1 w1) w2
            dact = dy2 @ p[lp + "w2"].T
            grads[lp + "w2"] += lc["act"].reshape(-1, d.ffn).T @ dy2.reshape(-1, d.hidden)
            dpre = dact * _gelu_grad(lc["pre"])
            dx1 = dy2 + dpre @ p[lp + "w1"].T
            grads[lp + "w1"] += lc["x1"].reshape(-1, d.hidden).T @ dpre.reshape(-1, d.ffn)

            dy1, dg1, db1 = _layernorm_bwd(dx1, p[lp + "ln1_g"], lc["ln1c"])
            grads[lp + "ln1_g"] += dg1
            grads[lp + "ln1_b"] += db1
            # y1 = x_in + (merge(attn @ vh)) wo
            dctx = dy1 @ p[lp + "wo"].T
            grads[lp + "wo"] += lc["ctx"].reshape(-1, d.hidden).T @ dy1.reshape(-1, d.hidden)
            dctxh = _split_heads(dctx, d.heads)
            dattn = dctxh @ lc["vh"].transpose(0, 1, 3, 2)
            dvh = lc["attn"].transpose(0, 1, 3, 2) @ dctxh
            a = lc["attn"]
            dscores = a * (dattn - (dattn * a).sum(axis=-1, keepdims=True))
            dqh = dscores @ lc["kh"] * scale
            dkh = dscores.transpose(0, 1, 3, 2) @ lc["qh"] * scale
            dq, dk, dv = (_merge_heads(a_) for a_ in (dqh, dkh, dvh))
            x_in = lc["x_in"]
            flat = x_in.reshape(-1, d.hidden)
            grads[lp + "wq"] += flat.T @ dq.reshape(-1, d.hidden)
            grads[lp + "wk"] += flat.T @ dk.reshape(-1, d.hidden)
            grads[lp + "wv"] += flat.T @ dv.reshape(-1, d.hidden)
            dx = dy1 + dq @ p[lp + "wq"].T + dk @ p[lp + "wk"].T + dv @ p[lp + "wv"].T

        ids = cache["ids"]
        t = ids.shape[1]
        grads["pos"][:t] += dx.sum(axis=0)
        np.add.at(grads["emb"], ids.reshape(-1), dx.reshape(-1, d.hidden))
        return grads

    def logits(self, xf):
        return xf @ self.params["emb"].T + self.params["out_b"]

    @staticmethod
    def log_softmax(logits):
        m = logits.max(axis=-1, keepdims=True)
        z = logits - m
        return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    # -- losses ------------------------------------------------------------

    def mlm_loss_and_grad(self, ids, real, target_mask, target_ids):
        """Mean NLL over masked targets plus gradients for every parameter.

        target_mask marks model coordinates carrying a prediction target;
        each such coordinate must hold MASK in ids.
        """
        if not target_mask.any():
            raise ConfigError("batch has no masked targets")
        if not (ids[target_mask] == self.mask_id).all():
            raise ConfigError("target at an unmasked position")
        xf, cache = self.forward_hidden(ids, real)
        logits = self.logits(xf)
        logp = self.log_softmax(logits)
        rows = np.nonzero(target_mask)
        gold = target_ids[target_mask]
        n_t = gold.shape[0]
        loss = -logp[rows[0], rows[1], gold].mean()

        dlogits = np.zeros_like(logits)
        soft = np.exp(logp[rows[0], rows[1]])
        soft[np.arange(n_t), gold] -= 1.0
        dlogits[rows[0], rows[1]] = soft / n_t

        grads = self._backward_from_logits(cache, xf, dlogits)
        return loss, grads

    def _backward_from_logits(self, cache, xf, dlogits):
        d = self.dims
        demb_out = dlogits.reshape(-1, d.vocab_size).T @ xf.reshape(-1, d.hidden)
        dout_b = dlogits.sum(axis=(0, 1))
        dxf = dlogits @ self.params["emb"]
        grads = self.backward_hidden(cache, dxf)
        grads["emb"] += demb_out
        grads["out_b"] += dout_b
        return grads

    def forward_mlm(self, sentence):
        """Per-position probability vectors over the vocab for one sentence."""
        ids, real = encode_batch([sentence_ids(sentence)], self.dims.max_len)
        xf, _ = self.forward_hidden(ids, real)
        logits = self.logits(xf)
        probs = np.exp(self.log_softmax(logits))
        return probs[0, 1:]  # drop the CLS slot

    # -- conditional queries for the dependence estimators ------------------

    def masked_conditional(self, ids_seq, pos: int):
        """p(x_pos = . | ids_seq) where ids_seq already has MASK at pos."""
        return self.masked_conditional_batch([ids_seq], [pos])[0]

    def masked_conditional_batch(self, id_seqs, positions):
        """Batched masked conditionals over the token vocabulary.

        The reserved PAD/MASK/UNK/CLS ids are encoder artifacts, not part of
        the modeled vocabulary, so their mass is zeroed and the rows
        renormalized before estimation or Gibbs sampling.
        """
        ids, real = encode_batch(id_seqs, self.dims.max_len)
        pos = np.asarray(positions, dtype=np.int64) + 1  # shift past CLS
        if (ids[np.arange(len(id_seqs)), pos] != self.mask_id).any():
            raise ConfigError("conditional query at an unmasked position")
        xf, _ = self.forward_hidden(ids, real)
        rows = xf[np.arange(len(id_seqs)), pos]
        logits = rows @ self.params["emb"].T + self.params["out_b"]
        logits -= logits.max(axis=-1, keepdims=True)
        ez = np.exp(logits)
        ez[:, : len(SPECIAL_TOKENS)] = 0.0
        return ez / ez.sum(axis=-1, keepdims=True)


def sentence_ids(sentence_or_ids):
    ids = getattr(sentence_or_ids, "ids", sentence_or_ids)
    return list(ids)


def encode_batch(id_seqs, max_len):
    """Prepend CLS, right-pad with PAD. Returns (ids, real) of shape (B, T)."""
    b = len(id_seqs)
    t = max(len(s) for s in id_seqs) + 1
    if t > max_len:
        raise ConfigError(f"batch length {t} exceeds max_len {max_len}")
    ids = np.full((b, t), PAD_ID, dtype=np.int64)
    real = np.zeros((b, t), dtype=bool)
    ids[:, 0] = CLS_ID
    real[:, 0] = True
    for r, seq in enumerate(id_seqs):
        n = len(seq)
        ids[r, 1 : n + 1] = seq
        real[r, 1 : n + 1] = True
    return ids, real


def batch_from_masked(masked_items, max_len):
    """Assemble (ids, real, target_mask, target_ids) from (masked ids, {pos: gold}) pairs."""
    id_seqs = [sentence_ids(s) for s, _ in masked_items]
    ids, real = encode_batch(id_seqs, max_len)
    target_mask = np.zeros_like(real)
    target_ids = np.zeros_like(ids)
    for r, (_, targets) in enumerate(masked_items):
        for pos, gold in targets.items():
            target_mask[r, pos + 1] = True
            target_ids[r, pos + 1] = gold
    return ids, real, target_mask, target_ids


def mlm_loss_and_grad(model: TinyMLM, masked_items):
    """Convenience wrapper over list-of-(masked sentence, targets) batches."""
    ids, real, tmask, tids = batch_from_masked(masked_items, model.dims.max_len)
    return model.mlm_loss_and_grad(ids, real, tmask, tids)


# ---------------------------------------------------------------------------
# Checkpoint format: magic, version, dims, vocab hash, then raw f64 tensors
# in param_names order (little endian).

_MAGIC = b"DMLM"
_VERSION = 1


def save_checkpoint(model: TinyMLM, vocab: Vocab, path):
    d = model.dims
    header = _MAGIC + struct.pack(
        "<7I", _VERSION, d.vocab_size, d.max_len, d.layers, d.hidden, d.heads, d.ffn
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vocab.content_hash())
        for name in param_names(d.layers):
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path, vocab: Vocab | None = None) -> TinyMLM:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ConfigError(f"not a model checkpoint (magic {magic!r})")
        version, vs, ml, layers, hidden, heads, ffn = struct.unpack("<7I", fh.read(28))
        if version != _VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        vocab_hash = fh.read(32)
        if vocab is not None and vocab.content_hash() != vocab_hash:
            raise ConfigError("checkpoint was trained with a different vocab")
        dims = ModelDims(vs, ml, layers, hidden, heads, ffn)
        params = {}
        for name in param_names(layers):
            shape = _param_shape(name, dims)
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ConfigError("truncated checkpoint")
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return TinyMLM(dims, params)

"""MLM pretraining and classification finetuning with Adam.

Both loops are plain full-batch-deterministic SGD-style drivers: given the
same seed, config, and corpus they reproduce the same parameters bit for
bit. No schedules, no dropout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingDivergedError
from .masking import MaskStats, apply_mask, sample_mask
from .model import TinyMLM, batch_from_masked, encode_batch
from .rng import Stream


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.epochs < 1:
            raise ConfigError("need at least one epoch")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


class Adam:
    def __init__(self, names, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {n: None for n in names}
        self.v = {n: None for n in names}

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for name, g in grads.items():
            if self.m[name] is None:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            params[name] -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def _batches(order, batch_size):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def train_mlm(model: TinyMLM, sentences, strategy, cfg: TrainConfig,
              stats: MaskStats | None = None):
    """Pretrain a copy of `model` on `sentences` under a mask strategy.

    Returns (trained model, per-epoch mean loss). The epoch loss is the
    total NLL over masked targets divided by the number of targets.
    """
    if not sentences:
        raise ConfigError("cannot pretrain on an empty corpus")
    model = model.clone()
    opt = Adam(list(model.params), cfg)
    root = Stream.from_seed(cfg.seed, "train-mlm")
    history = []
    for epoch in range(cfg.epochs):
        order = root.split("order", epoch).permutation(len(sentences))
        mask_stream = root.split("mask", epoch)
        total_nll = 0.0
        total_targets = 0
        for bi, batch_idx in enumerate(_batches(order, cfg.batch_size)):
            items = []
            for si in batch_idx:
                sent = sentences[si]
                positions = sample_mask(strategy, sent, mask_stream, stats)
                masked = apply_mask(sent, positions)
                items.append((masked, {p: sent.ids[p] for p in positions}))
            ids, real, tmask, tids = batch_from_masked(items, model.dims.max_len)
            loss, grads = model.mlm_loss_and_grad(ids, real, tmask, tids)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, bi)
            n_t = int(tmask.sum())
            total_nll += loss * n_t
            total_targets += n_t
            opt.step(model.params, grads)
        history.append(total_nll / total_targets)
    return model, history


# ---------------------------------------------------------------------------
# Finetuning


@dataclass
class ClassifierHead:
    w: np.ndarray  # (hidden, n_classes)
    b: np.ndarray  # (n_classes,)

    @classmethod
    def init(cls, hidden, n_classes, stream: Stream, scale=0.02):
        return cls(w=stream.normal(0.0, scale, (hidden, n_classes)), b=np.zeros(n_classes))

    def clone(self):
        return ClassifierHead(w=self.w.copy(), b=self.b.copy())


@dataclass
class FinetuneResult:
    model: TinyMLM
    head: ClassifierHead
    dev_accuracy: float
    best_epoch: int
    history: list = field(default_factory=list)


def _cls_loss_and_grad(model, head, id_seqs, labels):
    ids, real = encode_batch(id_seqs, model.dims.max_len)
    xf, cache = model.forward_hidden(ids, real)
    h_cls = xf[:, 0, :]
    logits = h_cls @ head.w + head.b
    logp = TinyMLM.log_softmax(logits)
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dw = h_cls.T @ dlogits
    db = dlogits.sum(axis=0)
    dxf = np.zeros_like(xf)
    dxf[:, 0, :] = dlogits @ head.w.T
    theta_grads = model.backward_hidden(cache, dxf)
    return loss, theta_grads, dw, db


def predict_labels(model, head, sentences, batch_size=64):
    out = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start : start + batch_size]
        ids, real = encode_batch([list(s.ids) for s in chunk], model.dims.max_len)
        xf, _ = model.forward_hidden(ids, real)
        logits = xf[:, 0, :] @ head.w + head.b
        out.extend(int(i) for i in logits.argmax(axis=1))
    return out


def accuracy(model, head, labeled):
    sentences = [s for s, _ in labeled]
    gold = [y for _, y in labeled]
    pred = predict_labels(model, head, sentences)
    return float(np.mean([p == g for p, g in zip(pred, gold)]))


def finetune(model: TinyMLM, train_set, dev_set, cfg: TrainConfig,
             n_classes: int | None = None, freeze_base: bool = False) -> FinetuneResult:
    """Train a CLS-position classifier head jointly with the encoder.

    Early-stops on dev accuracy with cfg.early_stop_patience; returns the
    model/head snapshot from the best dev epoch.
    """
    if not train_set:
        raise ConfigError("empty finetuning set")
    labels = sorted({y for _, y in train_set})
    if len(labels) < 2:
        raise ConfigError("finetuning needs at least two classes in the training set")
    if n_classes is None:
        n_classes = max(labels) + 1

    model = model.clone()
    root = Stream.from_seed(cfg.seed, "finetune")
    head = ClassifierHead.init(model.dims.hidden, n_classes, root.split("head-init"))
    names = ([] if freeze_base else list(model.params)) + ["head.w", "head.b"]
    opt = Adam(names, cfg)

    best = FinetuneResult(model.clone(), head.clone(), -1.0, -1)
    since_improved = 0
    for epoch in range(cfg.epochs):
        order = root.split("order", epoch).permutation(len(train_set))
        for batch_idx in _batches(order, cfg.batch_size):
            seqs = [list(train_set[i][0].ids) for i in batch_idx]
            ys = np.array([train_set[i][1] for i in batch_idx])
            loss, theta_grads, dw, db = _cls_loss_and_grad(model, head, seqs, ys)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, int(batch_idx[0]))
            grads = {"head.w": dw, "head.b": db}
            if not freeze_base:
                grads.update(theta_grads)
            params = {"head.w": head.w, "head.b": head.b}
            if not freeze_base:
                params.update(model.params)
            opt.step(params, grads)
        acc = accuracy(model, head, dev_set)
        best.history.append(acc)
        if acc > best.dev_accuracy:
            best.model = model.clone()
            best.head = head.clone()
            best.dev_accuracy = acc
            best.best_epoch = epoch
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= cfg.early_stop_patience:
                break
    return best

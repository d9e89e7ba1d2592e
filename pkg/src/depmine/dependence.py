"""Pairwise dependence scores: corpus PMI, conditional PMI, Gibbs conditional MI.

Conditional MI for a pair (i, j) alternates Gibbs resampling of the two
positions under the model's masked conditionals, then plugs the sampled
pairs into the log-probability estimator. Model queries are cached per
distinct substituted context, which caps the number of forward passes per
chain at a few times the number of distinct sampled values regardless of
chain length.

Any object with `masked_conditional_batch(id_seqs, positions)` and a
`mask_id` attribute can serve as the model, which is how the exact
table-based oracle slots in for estimator verification.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Sentence
from .errors import ConfigError
from .rng import Stream


@dataclass(frozen=True)
class EstimatorConfig:
    gibbs_steps: int = 2000  # chain length for conditional MI
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.gibbs_steps < 1:
            raise ConfigError("need at least one Gibbs step")
        if not (0 <= self.burn_in < self.gibbs_steps):
            raise ConfigError("burn_in must be < gibbs_steps")


@dataclass
class DependenceMatrix:
    n: int
    scores: np.ndarray  # (n, n) symmetric, zero diagonal
    method: str
    meta: dict = field(default_factory=dict)

    def validate(self):
        if self.scores.shape != (self.n, self.n):
            raise ConfigError("score matrix shape mismatch")
        if not np.isfinite(self.scores).all():
            raise ConfigError("non-finite dependence score")
        if not (self.scores == self.scores.T).all():
            raise ConfigError("dependence matrix must be symmetric")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "method": self.method,
                "scores": [float(v) for v in self.scores.reshape(-1)],
                "meta": self.meta,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DependenceMatrix":
        rec = json.loads(text)
        n = rec["n"]
        return cls(
            n=n,
            scores=np.array(rec["scores"], dtype=float).reshape(n, n),
            method=rec["method"],
            meta=rec.get("meta", {}),
        )


# ---------------------------------------------------------------------------
# Corpus PMI


class PmiTable:
    """Type-level PMI from sentence co-occurrence with add-1 smoothing.

    All probabilities are sentence-level: p(a) is the smoothed fraction of
    sentences containing type a, p(a,b) the smoothed fraction containing
    both, so independent corpora score near zero.
    """

    def __init__(self, n_sentences, doc_counts, joint_counts):
        self.n_sentences = n_sentences
        self.doc_counts = doc_counts
        self.joint_counts = joint_counts

    @classmethod
    def from_corpus(cls, sentences) -> "PmiTable":
        doc = Counter()
        joint = Counter()
        n = 0
        for sent in sentences:
            n += 1
            types = sorted(set(getattr(sent, "ids", sent)))
            doc.update(types)
            for ai in range(len(types)):
                for bi in range(ai + 1, len(types)):
                    joint[(types[ai], types[bi])] += 1
        if n == 0:
            raise ConfigError("cannot build a PMI table from an empty corpus")
        return cls(n, doc, joint)

    def pmi(self, a, b) -> float:
        n1 = self.n_sentences + 1
        if a == b:
            j = self.doc_counts.get(a, 0)
        else:
            j = self.joint_counts.get((min(a, b), max(a, b)), 0)
        return (
            math.log(j + 1)
            + math.log(n1)
            - math.log(self.doc_counts.get(a, 0) + 1)
            - math.log(self.doc_counts.get(b, 0) + 1)
        )


# ---------------------------------------------------------------------------
# Conditional PMI


def cond_pmi(model, sentence: Sentence, i: int, j: int) -> float:
    """log p(x_i | all others) - log p(x_i | others with x_j also masked)."""
    n = len(sentence)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ConfigError(f"invalid position pair ({i}, {j}) for length {n}")
    ids = list(sentence.ids)
    one = list(ids)
    one[i] = model.mask_id
    two = list(one)
    two[j] = model.mask_id
    probs = model.masked_conditional_batch([one, two], [i, i])
    return float(np.log(probs[0, ids[i]]) - np.log(probs[1, ids[i]]))


# ---------------------------------------------------------------------------
# Gibbs chains and the conditional MI estimator


@dataclass
class GibbsChain:
    """Sampled (x_i, x_j) pairs for one masked position pair."""

    i: int
    j: int
    samples: np.ndarray  # (steps, 2)
    context_ids: tuple  # sentence ids with both positions masked

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] != 2:
            raise ConfigError("chain samples must be (steps, 2)")


class _PairChain:
    """State machine for one pair's chain, driven in lockstep with others."""

    __slots__ = ("i", "j", "base", "uniforms", "cur_other", "samples", "cache", "vocab_size")

    def __init__(self, ids, i, j, mask_id, steps, stream):
        self.i = i
        self.j = j
        self.base = list(ids)
        self.base[i] = mask_id
        self.base[j] = mask_id
        self.uniforms = stream.random((steps, 2))
        self.cur_other = mask_id  # current value at j, as seen by the i-query
        self.samples = np.empty((steps, 2), dtype=np.int64)
        self.cache = {}  # (pos, value at the other pair slot) -> cumulative probs

    def query_ids(self, pos, other_val):
        ids = list(self.base)
        other = self.j if pos == self.i else self.i
        ids[other] = other_val
        return ids

    def sample(self, pos, other_val, u):
        cdf = self.cache[(pos, other_val)]
        return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def _fill_caches(model, chains, requests):
    """requests: list of (chain, pos, other_val) cache misses, deduplicated."""
    todo = [(c, pos, val) for c, pos, val in requests if (pos, val) not in c.cache]
    if not todo:
        return
    seqs = [c.query_ids(pos, val) for c, pos, val in todo]
    probs = model.masked_conditional_batch(seqs, [pos for _, pos, _ in todo])
    for (c, pos, val), row in zip(todo, probs):
        c.cache[(pos, val)] = np.cumsum(row)


def _run_chains(model, sentence, pairs, steps, stream):
    """Run Gibbs chains for the given position pairs in lockstep."""
    mask_id = model.mask_id
    chains = [
        _PairChain(sentence.ids, i, j, mask_id, steps, stream.split(i, j))
        for i, j in pairs
    ]
    for t in range(steps):
        _fill_caches(model, chains, [(c, c.i, c.cur_other) for c in chains])
        for c in chains:
            c.samples[t, 0] = c.sample(c.i, c.cur_other, c.uniforms[t, 0])
        _fill_caches(model, chains, [(c, c.j, int(c.samples[t, 0])) for c in chains])
        for c in chains:
            c.samples[t, 1] = c.sample(c.j, int(c.samples[t, 0]), c.uniforms[t, 1])
            c.cur_other = int(c.samples[t, 1])
    return chains


def gibbs_chain(model, sentence: Sentence, i: int, j: int, steps: int,
                stream: Stream) -> GibbsChain:
    """Alternating resampling of positions i and j from the model conditionals.

    Starts from the doubly masked context; step t samples x_i from the
    model with i masked (j holding the previous sample), substitutes it,
    then samples x_j likewise.
    """
    n = len(sentence)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ConfigError(f"invalid position pair ({i}, {j}) for length {n}")
    if steps < 1:
        raise ConfigError("need at least one Gibbs step")
    chain = _run_chains(model, sentence, [(i, j)], steps, stream)[0]
    return GibbsChain(i=i, j=j, samples=chain.samples, context_ids=tuple(chain.base))


def _direction_estimate(chain: _PairChain, target_pos, burn_in):
    """Plug-in estimate of I in the direction p(x_target | x_other)."""
    col = 0 if target_pos == chain.i else 1
    a = chain.samples[burn_in:, col]
    b = chain.samples[burn_in:, 1 - col]
    values, counts = np.unique(b, return_counts=True)
    rows = []
    for v in values:
        cdf = chain.cache[(target_pos, int(v))]
        rows.append(np.diff(cdf, prepend=0.0))
    p = np.stack(rows)  # (K, vocab)
    w = counts / counts.sum()
    mix = w @ p
    b_idx = np.searchsorted(values, b)
    term1 = np.log(p[b_idx, a]).mean()
    term2 = np.log(mix[a]).mean()
    return float(term1 - term2)


def _ensure_estimate_rows(model, chains, burn_in):
    # The final x_j sample never conditioned an i-query (and vice versa for
    # burn-in trims), so fetch any rows the estimator still needs.
    requests = []
    for c in chains:
        for pos, col in ((c.i, 1), (c.j, 0)):
            for v in np.unique(c.samples[burn_in:, col]):
                requests.append((c, pos, int(v)))
    _fill_caches(model, chains, requests)


def cond_mi(model, sentence: Sentence, i: int, j: int, steps: int, stream: Stream,
            burn_in: int = 0) -> float:
    """Gibbs plug-in conditional MI estimate in the direction p(x_i | x_j)."""
    if steps < 1:
        raise ConfigError("need at least one Gibbs step")
    chains = _run_chains(model, sentence, [(i, j)], steps, stream)
    _ensure_estimate_rows(model, chains, burn_in)
    return _direction_estimate(chains[0], i, burn_in)


# ---------------------------------------------------------------------------
# Whole-sentence dependence matrices


def aggregate_words(matrix: DependenceMatrix, word_map) -> DependenceMatrix:
    """Collapse subword positions to words by taking the max over cell blocks."""
    if len(word_map) != matrix.n:
        raise ConfigError(
            f"word_map length {len(word_map)} does not match matrix size {matrix.n}"
        )
    n_words = word_map[-1] + 1
    out = np.zeros((n_words, n_words))
    filled = np.zeros((n_words, n_words), dtype=bool)
    wm = list(word_map)
    for a in range(matrix.n):
        for b in range(matrix.n):
            u, w = wm[a], wm[b]
            if u == w:
                continue
            v = matrix.scores[a, b]
            if not filled[u, w] or v > out[u, w]:
                out[u, w] = v
                filled[u, w] = True
    return DependenceMatrix(n=n_words, scores=out, method=matrix.method, meta=dict(matrix.meta))


def dependence_matrix(model_or_table, sentence: Sentence, method: str,
                      cfg: EstimatorConfig | None = None,
                      stream: Stream | None = None) -> DependenceMatrix:
    """Score every position pair of one sentence and aggregate to word level.

    Directional scores (conditional PMI / conditional MI) are symmetrized as
    the mean of the two directions; PMI is symmetric by construction. Pass a
    per-sentence stream when scoring a corpus so chains do not share draws.
    """
    cfg = cfg or EstimatorConfig()
    method = method.lower()
    n = len(sentence)
    if n < 2:
        raise ConfigError("dependence matrices need at least two positions")
    scores = np.zeros((n, n))

    if method == "pmi":
        table: PmiTable = model_or_table
        for i in range(n):
            for j in range(i + 1, n):
                v = table.pmi(sentence.ids[i], sentence.ids[j])
                scores[i, j] = scores[j, i] = v
        meta = {}
    elif method == "condpmi":
        model = model_or_table
        seqs, positions = [], []
        for i in range(n):
            one = list(sentence.ids)
            one[i] = model.mask_id
            seqs.append(one)
            positions.append(i)
        pair_index = {}
        for i in range(n):
            for j in range(i + 1, n):
                two = list(sentence.ids)
                two[i] = model.mask_id
                two[j] = model.mask_id
                pair_index[(i, j)] = len(seqs)
                seqs.extend([two, two])
                positions.extend([i, j])
        probs = model.masked_conditional_batch(seqs, positions)
        single = np.log([probs[i][sentence.ids[i]] for i in range(n)])
        for i in range(n):
            for j in range(i + 1, n):
                k = pair_index[(i, j)]
                s_ij = single[i] - np.log(probs[k][sentence.ids[i]])
                s_ji = single[j] - np.log(probs[k + 1][sentence.ids[j]])
                v = 0.5 * (s_ij + s_ji)
                scores[i, j] = scores[j, i] = v
        meta = {}
    elif method == "condmi":
        model = model_or_table
        if stream is None:
            stream = Stream.from_seed(cfg.seed, "condmi")
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        chains = _run_chains(model, sentence, pairs, cfg.gibbs_steps, stream)
        _ensure_estimate_rows(model, chains, cfg.burn_in)
        for c in chains:
            s_ij = _direction_estimate(c, c.i, cfg.burn_in)
            s_ji = _direction_estimate(c, c.j, cfg.burn_in)
            v = 0.5 * (s_ij + s_ji)
            scores[c.i, c.j] = scores[c.j, c.i] = v
        meta = {"gibbs_steps": cfg.gibbs_steps, "seed": cfg.seed}
    else:
        raise ConfigError(f"unknown dependence method {method!r}")

    mat = DependenceMatrix(n=n, scores=scores, method=method, meta=meta)
    word_level = aggregate_words(mat, sentence.word_map)
    word_level.validate()
    return word_level

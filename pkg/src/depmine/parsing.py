"""Tree induction from dependence scores, baselines, and UUAS scoring."""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import GoldTree, normalize_edge
from .errors import ConfigError
from .rng import Stream


@dataclass(frozen=True)
class ParseTree:
    n_words: int
    edges: frozenset

    def __post_init__(self):
        if self.n_words < 2:
            raise ConfigError("parse trees need at least two words")
        if len(self.edges) != self.n_words - 1:
            raise ConfigError("parse tree must have n-1 edges")
        parent = list(range(self.n_words))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.edges:
            if i == j or not (0 <= i < self.n_words and 0 <= j < self.n_words):
                raise ConfigError(f"bad edge ({i},{j})")
            ri, rj = find(i), find(j)
            if ri == rj:
                raise ConfigError("parse tree contains a cycle")
            parent[ri] = rj


def mst(matrix) -> ParseTree:
    """Maximum spanning tree over symmetric scores (Kruskal on sorted edges).

    Equivalent to a minimum spanning tree on the negated scores. Equal-score
    ties go to the lexicographically smaller (i, j) pair.
    """
    scores = matrix.scores if hasattr(matrix, "scores") else np.asarray(matrix)
    n = scores.shape[0]
    if n < 2:
        raise ConfigError("need at least two nodes")
    if not np.isfinite(scores).all():
        raise ConfigError("non-finite entry in score matrix")
    candidates = sorted(
        ((i, j) for i in range(n) for j in range(i + 1, n)),
        key=lambda e: (-scores[e[0], e[1]], e[0], e[1]),
    )
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = set()
    for i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.add((i, j))
            if len(edges) == n - 1:
                break
    return ParseTree(n_words=n, edges=frozenset(edges))


def linear_chain(n: int) -> ParseTree:
    if n < 2:
        raise ConfigError("need at least two words")
    return ParseTree(n_words=n, edges=frozenset((k, k + 1) for k in range(n - 1)))


def prufer_decode(seq, n) -> frozenset:
    """Edges of the labeled tree encoded by a Prufer sequence of length n-2."""
    if len(seq) != n - 2:
        raise ConfigError("Prufer sequence must have length n-2")
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = set()
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.add(normalize_edge(leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.add(normalize_edge(u, w))
    return frozenset(edges)


def random_tree(n: int, stream: Stream) -> ParseTree:
    """Uniform random labeled spanning tree via a random Prufer sequence."""
    if n < 2:
        raise ConfigError("need at least two words")
    if n == 2:
        return ParseTree(n_words=2, edges=frozenset({(0, 1)}))
    seq = [int(v) for v in stream.integers(0, n, size=n - 2)]
    return ParseTree(n_words=n, edges=prufer_decode(seq, n))


def uuas(pred: ParseTree, gold: GoldTree) -> float:
    """Fraction of gold edges recovered, directions and labels ignored."""
    if pred.n_words != gold.n_words:
        raise ConfigError(
            f"tree sizes differ: pred {pred.n_words} vs gold {gold.n_words}"
        )
    return len(pred.edges & gold.edges) / len(gold.edges)


def corpus_uuas(preds, golds) -> float:
    """Micro-averaged UUAS: recovered gold edges over all gold edges."""
    hit = total = 0
    for pred, gold in zip(preds, golds, strict=True):
        if pred.n_words != gold.n_words:
            raise ConfigError("tree size mismatch in corpus scoring")
        hit += len(pred.edges & gold.edges)
        total += len(gold.edges)
    return hit / total


# ---------------------------------------------------------------------------
# Relation-level analysis


def log_odds_test(a_hit, a_miss, b_hit, b_miss):
    """Haldane-Anscombe corrected log odds ratio with a Wald significance test.

    Returns (log_odds, significant at p = 0.05).
    """
    if min(a_hit, a_miss, b_hit, b_miss) < 0:
        raise ConfigError("counts must be non-negative")
    ah, am, bh, bm = (c + 0.5 for c in (a_hit, a_miss, b_hit, b_miss))
    log_odds = math.log(ah * bm / (am * bh))
    se = math.sqrt(1 / ah + 1 / am + 1 / bh + 1 / bm)
    return log_odds, abs(log_odds) > 1.96 * se


@dataclass(frozen=True)
class RelationRow:
    relation: str
    gold_count: int
    method_hits: int
    chain_hits: int
    log_odds: float
    significant: bool

    @property
    def method_recall(self):
        return self.method_hits / self.gold_count

    @property
    def chain_recall(self):
        return self.chain_hits / self.gold_count


@dataclass
class RelationReport:
    rows: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["relation", "gold_count", "method_recall", "chain_recall",
                        "log_odds", "significant"])
            for r in self.rows:
                w.writerow([r.relation, r.gold_count, f"{r.method_recall:.6f}",
                            f"{r.chain_recall:.6f}", f"{r.log_odds:.6f}",
                            int(r.significant)])


def relation_recall(pred_trees, gold_trees) -> RelationReport:
    """Per-relation recall of the method against the adjacent-word baseline."""
    gold_count = {}
    method_hits = {}
    chain_hits = {}
    for pred, gold in zip(pred_trees, gold_trees, strict=True):
        if pred.n_words != gold.n_words:
            raise ConfigError("tree size mismatch in relation scoring")
        chain_edges = linear_chain(gold.n_words).edges
        for edge in gold.edges:
            rel = gold.relations[edge]
            gold_count[rel] = gold_count.get(rel, 0) + 1
            if edge in pred.edges:
                method_hits[rel] = method_hits.get(rel, 0) + 1
            if edge in chain_edges:
                chain_hits[rel] = chain_hits.get(rel, 0) + 1
    rows = []
    for rel in sorted(gold_count):
        g = gold_count[rel]
        mh = method_hits.get(rel, 0)
        ch = chain_hits.get(rel, 0)
        lo, sig = log_odds_test(mh, g - mh, ch, g - ch)
        rows.append(RelationRow(rel, g, mh, ch, lo, sig))
    return RelationReport(rows=rows)


# ---------------------------------------------------------------------------
# Parse serialization


def write_parses_tsv(trees, sentences, path):
    """Word index, surface form, and sorted neighbor list per token."""
    with open(path, "w", encoding="utf-8") as fh:
        for tree, sent in zip(trees, sentences, strict=True):
            neighbors = {w: [] for w in range(tree.n_words)}
            for i, j in sorted(tree.edges):
                neighbors[i].append(j)
                neighbors[j].append(i)
            words = _word_surfaces(sent)
            for w in range(tree.n_words):
                ns = ",".join(str(v) for v in sorted(neighbors[w]))
                fh.write(f"{w}\t{words[w]}\t{ns}\n")
            fh.write("\n")


def write_parses_json(trees, sentences, path):
    with open(path, "w", encoding="utf-8") as fh:
        for tree, sent in zip(trees, sentences, strict=True):
            rec = {
                "words": _word_surfaces(sent),
                "edges": [list(e) for e in sorted(tree.edges)],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _word_surfaces(sentence):
    words = [""] * sentence.n_words
    for pos, w in enumerate(sentence.word_map):
        words[w] = words[w] + sentence.surface[pos] if words[w] else sentence.surface[pos]
    return words

import itertools

import numpy as np
import pytest

from depmine.corpus import GoldTree
from depmine.errors import ConfigError
from depmine.parsing import (
    ParseTree,
    corpus_uuas,
    linear_chain,
    log_odds_test,
    mst,
    prufer_decode,
    random_tree,
    relation_recall,
    uuas,
)
from depmine.rng import Stream


def all_spanning_trees(n):
    """Every labeled tree on n nodes via Prufer enumeration."""
    if n == 2:
        yield frozenset({(0, 1)})
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield prufer_decode(list(seq), n)


def tree_score(edges, scores):
    return sum(scores[i, j] for i, j in edges)


def test_mst_two_nodes():
    assert mst(np.array([[0.0, -5.0], [-5.0, 0.0]])).edges == frozenset({(0, 1)})


def test_mst_three_node_example():
    s = np.zeros((3, 3))
    s[0, 1] = s[1, 0] = 5.0
    s[0, 2] = s[2, 0] = 1.0
    s[1, 2] = s[2, 1] = 3.0
    assert mst(s).edges == frozenset({(0, 1), (1, 2)})


def test_mst_matches_exhaustive_maximum():
    stream = Stream.from_seed(404)
    for trial in range(120):
        n = int(stream.integers(2, 7))
        s = stream.normal(0.0, 1.0, (n, n))
        s = s + s.T
        np.fill_diagonal(s, 0.0)
        got = tree_score(mst(s).edges, s)
        best = max(tree_score(e, s) for e in all_spanning_trees(n))
        assert abs(got - best) < 1e-12


def test_mst_monotone_invariance():
    stream = Stream.from_seed(11)
    s = stream.normal(0.0, 1.0, (6, 6))
    s = s + s.T
    np.fill_diagonal(s, 0.0)
    base = mst(s).edges
    assert mst(2.0 * s + 1.0).edges == base
    assert mst(np.exp(s)).edges == base


def test_mst_tie_break_lexicographic():
    s = np.ones((4, 4))
    np.fill_diagonal(s, 0.0)
    assert mst(s).edges == frozenset({(0, 1), (0, 2), (0, 3)})


def test_mst_rejects_nonfinite():
    s = np.zeros((3, 3))
    s[0, 1] = s[1, 0] = np.inf
    with pytest.raises(ConfigError):
        mst(s)


def test_linear_chain():
    assert linear_chain(4).edges == frozenset({(0, 1), (1, 2), (2, 3)})


def test_random_tree_two_nodes(stream):
    for _ in range(10):
        assert random_tree(2, stream).edges == frozenset({(0, 1)})


def test_random_tree_uniform_over_labeled_trees():
    stream = Stream.from_seed(99)
    counts = {}
    draws = 10_000
    for _ in range(draws):
        t = random_tree(4, stream)
        counts[t.edges] = counts.get(t.edges, 0) + 1
    assert len(counts) == 16  # Cayley: 4^2 labeled trees
    freqs = np.array(list(counts.values())) / draws
    assert np.abs(freqs - 1 / 16).max() < 0.01


def test_parse_tree_validation():
    with pytest.raises(ConfigError):
        ParseTree(n_words=3, edges=frozenset({(0, 1)}))
    with pytest.raises(ConfigError):
        ParseTree(n_words=3, edges=frozenset({(0, 1), (0, 1)}))


def test_uuas_basics():
    gold = GoldTree.from_edges(5, [(k, k + 1, "dep") for k in range(4)])
    assert uuas(ParseTree(5, gold.edges), gold) == 1.0
    star = ParseTree(5, frozenset({(0, k) for k in range(1, 5)}))
    assert uuas(star, gold) == 0.25
    disjoint = ParseTree(5, frozenset({(0, 2), (2, 4), (1, 4), (1, 3)}))
    assert uuas(disjoint, gold) == 0.0


def test_uuas_size_mismatch():
    gold = GoldTree.from_edges(3, [(0, 1, "a"), (1, 2, "b")])
    with pytest.raises(ConfigError):
        uuas(ParseTree(4, frozenset({(0, 1), (1, 2), (2, 3)})), gold)


def test_uuas_invariant_under_relabeling(stream):
    for _ in range(20):
        n = 6
        gold_edges = random_tree(n, stream).edges
        pred_edges = random_tree(n, stream).edges
        gold = GoldTree.from_edges(n, [(i, j, "d") for i, j in gold_edges])
        base = uuas(ParseTree(n, pred_edges), gold)
        perm = stream.permutation(n)
        remap = lambda e: tuple(sorted((int(perm[e[0]]), int(perm[e[1]]))))
        gold2 = GoldTree.from_edges(n, [(*remap(e), "d") for e in gold_edges])
        pred2 = ParseTree(n, frozenset(remap(e) for e in pred_edges))
        assert abs(uuas(pred2, gold2) - base) < 1e-12


def test_corpus_uuas_micro_average():
    g1 = GoldTree.from_edges(2, [(0, 1, "a")])
    g2 = GoldTree.from_edges(4, [(0, 1, "a"), (1, 2, "a"), (2, 3, "a")])
    p1 = ParseTree(2, frozenset({(0, 1)}))
    p2 = ParseTree(4, frozenset({(0, 2), (1, 2), (2, 3)}))
    # 1 + 2 recovered out of 4 gold edges
    assert corpus_uuas([p1, p2], [g1, g2]) == 0.75


def test_log_odds_identical_tables():
    lo, sig = log_odds_test(30, 20, 30, 20)
    assert lo == 0.0 and not sig


def test_log_odds_strong_difference():
    lo, sig = log_odds_test(90, 10, 10, 90)
    assert abs(lo - np.log((90.5 * 90.5) / (10.5 * 10.5))) < 1e-12
    assert abs(lo - 4.3077) < 1e-3
    assert sig


def test_log_odds_all_zero_counts():
    lo, sig = log_odds_test(0, 0, 0, 0)
    assert lo == 0.0 and not sig


def test_relation_recall_oracle_and_chain():
    golds = []
    stream = Stream.from_seed(5)
    for _ in range(30):
        edges = random_tree(6, stream).edges
        labeled = [(i, j, "adj" if j == i + 1 else "far") for i, j in edges]
        golds.append(GoldTree.from_edges(6, labeled))
    preds = [ParseTree(g.n_words, g.edges) for g in golds]
    report = relation_recall(preds, golds)
    by_rel = {r.relation: r for r in report.rows}
    assert set(by_rel) == {"adj", "far"}
    for r in report.rows:
        assert r.method_hits == r.gold_count  # oracle predictions
    assert by_rel["adj"].chain_hits == by_rel["adj"].gold_count
    assert by_rel["far"].chain_hits == 0


def test_relation_report_csv(tmp_path):
    gold = GoldTree.from_edges(3, [(0, 1, "a"), (0, 2, "b")])
    report = relation_recall([ParseTree(3, gold.edges)], [gold])
    path = tmp_path / "rel.csv"
    report.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "relation,gold_count,method_recall,chain_recall,log_odds,significant"
    assert len(lines) == 3

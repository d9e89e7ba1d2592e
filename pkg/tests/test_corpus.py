import json

import numpy as np
import pytest

from depmine.corpus import (
    GoldTree,
    GrammarConfig,
    Lexicon,
    Sentence,
    Vocab,
    build_vocab,
    case_study_lexicon,
    case_study_vocab,
    dump_treebank,
    gen_case_study,
    gen_synthetic,
    load_conllu,
    load_lexicon,
    load_treebank,
    synthetic_vocab,
    LABEL_WORDS,
    NEGATIVE_WORDS,
    POSITIVE_WORDS,
    MASK_ID,
)
from depmine.errors import (
    ConfigError,
    ConlluParseError,
    EmptyLexiconError,
    TreeValidityError,
)

CONLLU_2TOK = """1\tthe\t_\t_\t_\t_\t2\tdet\t_\t_
2\tcat\t_\t_\t_\t_\t0\troot\t_\t_

"""

CONLLU_CHAIN = """# sent_id = chain-1
1\ta\t_\t_\t_\t_\t2\tdep\t_\t_
2\tb\t_\t_\t_\t_\t0\troot\t_\t_
3\tc\t_\t_\t_\t_\t2\tobj\t_\t_

"""

CONLLU_CYCLE = """1\ta\t_\t_\t_\t_\t2\tdep\t_\t_
2\tb\t_\t_\t_\t_\t1\tdep\t_\t_

"""


def test_vocab_round_trip():
    v = build_vocab(["a b", "a"], min_count=1)
    for i, tok in enumerate(v.tokens):
        assert v.id_of[tok] == i
    assert set(v.tokens[4:]) == {"a", "b"}


def test_vocab_min_count_maps_rare_to_unk():
    v = build_vocab(["a b", "a"], min_count=2)
    assert "b" not in v.id_of
    assert v.encode_token("b") == v.unk_id


def test_vocab_never_encodes_specials_from_text():
    v = build_vocab(["a [MASK] b"], min_count=1)
    assert v.encode_token("[MASK]") == v.unk_id


def test_empty_corpus_rejected():
    with pytest.raises(ConfigError):
        build_vocab([], min_count=1)


def test_sentence_word_map_validation():
    with pytest.raises(ConfigError):
        Sentence(ids=(5, 6), surface=("a", "b"), word_map=(0, 2))
    with pytest.raises(ConfigError):
        Sentence(ids=(5, 6), surface=("a", "b"), word_map=(1, 1))


def test_gold_tree_validation():
    with pytest.raises(TreeValidityError):
        GoldTree.from_edges(3, [(0, 1, "x")])  # too few edges
    with pytest.raises(TreeValidityError):
        GoldTree.from_edges(3, [(0, 1, "x"), (0, 1, "y")])  # duplicate edge
    tree = GoldTree.from_edges(3, [(0, 1, "x"), (1, 2, "y")])
    assert tree.edges == frozenset({(0, 1), (1, 2)})


def test_load_conllu_two_token(tmp_path):
    path = tmp_path / "two.conllu"
    path.write_text(CONLLU_2TOK, encoding="utf-8")
    pairs = load_conllu(path)
    assert len(pairs) == 1
    sent, tree = pairs[0]
    assert len(sent) == 2
    assert tree.edges == frozenset({(0, 1)})
    assert tree.relations[(0, 1)] == "det"


def test_load_conllu_chain_heads(tmp_path):
    path = tmp_path / "chain.conllu"
    path.write_text(CONLLU_CHAIN, encoding="utf-8")
    [(sent, tree)] = load_conllu(path)
    assert tree.edges == frozenset({(0, 1), (1, 2)})
    assert sent.surface == ("a", "b", "c")


def test_load_conllu_cycle_raises(tmp_path):
    path = tmp_path / "cycle.conllu"
    path.write_text(CONLLU_CYCLE, encoding="utf-8")
    with pytest.raises(TreeValidityError):
        load_conllu(path)


def test_load_conllu_malformed_line_number(tmp_path):
    path = tmp_path / "bad.conllu"
    path.write_text("1\tonly\tthree\n", encoding="utf-8")
    with pytest.raises(ConlluParseError) as err:
        load_conllu(path)
    assert err.value.line_no == 1


def test_load_conllu_skips_multiword_and_comments(tmp_path):
    text = (
        "# newdoc\n"
        "1-2\tdoesn't\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tdoes\t_\t_\t_\t_\t0\troot\t_\t_\n"
        "2\tnot\t_\t_\t_\t_\t1\tneg\t_\t_\n\n"
    )
    path = tmp_path / "mw.conllu"
    path.write_text(text, encoding="utf-8")
    [(sent, tree)] = load_conllu(path)
    assert sent.surface == ("does", "not")
    assert tree.relations[(0, 1)] == "neg"


def test_treebank_json_round_trip(tmp_path):
    cfg = GrammarConfig(seed=5)
    pairs = gen_synthetic(cfg, 8)
    path = tmp_path / "tb.jsonl"
    dump_treebank(pairs, path)
    back = load_treebank(path, synthetic_vocab(cfg))
    assert len(back) == len(pairs)
    for (s1, t1), (s2, t2) in zip(pairs, back):
        assert s1.ids == s2.ids
        assert t1.edges == t2.edges
        assert t1.relations == t2.relations


# -- synthetic grammar -------------------------------------------------------


def test_gen_synthetic_deterministic():
    cfg = GrammarConfig(seed=3)
    a = gen_synthetic(cfg, 20)
    b = gen_synthetic(cfg, 20)
    assert [s.ids for s, _ in a] == [s.ids for s, _ in b]
    assert [t.edges for _, t in a] == [t.edges for _, t in b]


def test_gen_synthetic_prefix_stable():
    cfg = GrammarConfig(seed=3)
    assert [s.ids for s, _ in gen_synthetic(cfg, 5)] == [
        s.ids for s, _ in gen_synthetic(cfg, 10)
    ][:5]


def test_gen_synthetic_lengths_and_trees():
    cfg = GrammarConfig(seed=9, min_len=4, max_len=9)
    for sent, tree in gen_synthetic(cfg, 60):
        assert 4 <= len(sent) <= 9
        assert tree.n_words == len(sent)
        assert len(tree.edges) == len(sent) - 1


def test_stop_prob_one_rejected():
    with pytest.raises(ConfigError):
        GrammarConfig(stop_prob=1.0)


def test_sharp_attachment_concentrates_child_class():
    # With one topic and a huge concentration the child class given the head
    # class is near-deterministic: measure the modal-class frequency.
    cfg = GrammarConfig(n_word_classes=6, vocab_per_class=2, n_topics=1,
                        attach_concentration=50.0, stop_prob=0.6, max_len=8,
                        seed=2)
    pair_counts = {}
    for sent, tree in gen_synthetic(cfg, 6000):
        classes = [int(tok.split("x")[0][1:]) for tok in sent.surface]
        for (i, j) in tree.edges:
            rel = tree.relations[(i, j)]
            child, head = (i, j) if rel.startswith("L") else (j, i)
            pair_counts.setdefault(classes[head], []).append(classes[child])
    total = hits = 0
    for head_cls, children in pair_counts.items():
        if len(children) < 30:
            continue
        vals, counts = np.unique(children, return_counts=True)
        hits += counts.max()
        total += counts.sum()
    assert total > 10_000
    assert hits / total > 0.9


# -- case study corpus -------------------------------------------------------


def test_case_study_label_word_is_final():
    data = gen_case_study(200, seed=0)
    label_ids = {data.vocab.id_of[w] for w in LABEL_WORDS}
    for sent, label in data.appended:
        assert sent.ids[-1] in label_ids
        assert sent.surface[-1] == LABEL_WORDS[label]


def test_case_study_balance():
    data = gen_case_study(10_000, seed=1)
    frac = np.mean([y for _, y in data.plain])
    assert abs(frac - 0.5) < 0.03


def test_case_study_majority_matches_label():
    data = gen_case_study(2_000, seed=2)
    pos = set(POSITIVE_WORDS)
    neg = set(NEGATIVE_WORDS)
    for sent, label in data.plain:
        p = sum(t in pos for t in sent.surface)
        n = sum(t in neg for t in sent.surface)
        assert p != n
        assert (p > n) == (label == 1)


def test_case_study_plain_omits_label():
    data = gen_case_study(50, seed=3)
    for (app, _), (plain, _) in zip(data.appended, data.plain):
        assert app.surface[:-1] == plain.surface


# -- lexicons ----------------------------------------------------------------


def test_load_lexicon(tmp_path):
    v = build_vocab(["good bad other"], min_count=1)
    path = tmp_path / "lex.txt"
    path.write_text("good\nbad\tpos\n", encoding="utf-8")
    lex, dropped = load_lexicon(path, v)
    assert len(lex) == 2 and dropped == 0


def test_load_lexicon_drops_oov(tmp_path):
    v = build_vocab(["good"], min_count=1)
    path = tmp_path / "lex.txt"
    path.write_text("good\nzzzq\n", encoding="utf-8")
    lex, dropped = load_lexicon(path, v)
    assert len(lex) == 1 and dropped == 1


def test_load_lexicon_empty_raises(tmp_path):
    v = build_vocab(["good"], min_count=1)
    path = tmp_path / "lex.txt"
    path.write_text("zzzq\n", encoding="utf-8")
    with pytest.raises(EmptyLexiconError):
        load_lexicon(path, v)


def test_case_study_lexicon_disjoint_from_labels():
    v = case_study_vocab()
    lex = case_study_lexicon(v)
    assert len(lex) == 40
    for w in LABEL_WORDS:
        assert v.id_of[w] not in lex

"""Corpus ingestion, synthetic grammar generation, and vocabulary handling.

Three corpus sources feed the rest of the package: CoNLL-U treebanks (words
plus gold dependency edges), a synthetic dependency grammar whose sentences
carry known head-child couplings confounded by a latent topic, and a
templated sentiment corpus for the label-appending case study.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConlluParseError, EmptyLexiconError, TreeValidityError
from .rng import Stream

PAD_TOKEN = "[PAD]"
MASK_TOKEN = "[MASK]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SPECIAL_TOKENS = (PAD_TOKEN, MASK_TOKEN, UNK_TOKEN, CLS_TOKEN)

# Special ids are fixed by construction in every Vocab.
PAD_ID, MASK_ID, UNK_ID, CLS_ID = 0, 1, 2, 3


@dataclass(frozen=True)
class Vocab:
    """Ordered token table with reserved PAD/MASK/UNK/CLS ids."""

    tokens: tuple[str, ...]
    id_of: dict = field(repr=False)

    def __post_init__(self):
        if self.tokens[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise ConfigError("vocab must start with the reserved special tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise ConfigError("vocab tokens must be distinct")

    @classmethod
    def from_words(cls, words) -> "Vocab":
        """Build a vocab from an iterable of non-special surface strings."""
        body = []
        seen = set(SPECIAL_TOKENS)
        for w in words:
            if w not in seen:
                seen.add(w)
                body.append(w)
        tokens = SPECIAL_TOKENS + tuple(body)
        return cls(tokens=tokens, id_of={t: i for i, t in enumerate(tokens)})

    def __len__(self):
        return len(self.tokens)

    @property
    def pad_id(self):
        return 0

    @property
    def mask_id(self):
        return 1

    @property
    def unk_id(self):
        return 2

    @property
    def cls_id(self):
        return 3

    def encode_token(self, token: str) -> int:
        # Raw text can never produce a special id; literal "[MASK]" etc. map to UNK.
        if token in SPECIAL_TOKENS:
            return self.unk_id
        return self.id_of.get(token, self.unk_id)

    def sentence(self, tokens) -> "Sentence":
        """Word-level sentence with identity word_map."""
        toks = tuple(tokens)
        ids = tuple(self.encode_token(t) for t in toks)
        return Sentence(ids=ids, surface=toks, word_map=tuple(range(len(toks))))

    def content_hash(self) -> bytes:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).digest()


@dataclass(frozen=True)
class Sentence:
    """Token ids plus surface strings; word_map sends subword slots to words."""

    ids: tuple[int, ...]
    surface: tuple[str, ...]
    word_map: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.ids) == len(self.surface) == len(self.word_map)):
            raise ConfigError("ids, surface, and word_map must have equal length")
        if len(self.ids) == 0:
            raise ConfigError("empty sentence")
        prev = -1
        for w in self.word_map:
            if w < prev or w > prev + 1:
                raise ConfigError("word_map must be monotone with unit steps")
            prev = w
        if self.word_map[0] != 0:
            raise ConfigError("word_map must start at word 0")

    def __len__(self):
        return len(self.ids)

    @property
    def n_words(self):
        return self.word_map[-1] + 1

    def with_ids(self, ids) -> "Sentence":
        return Sentence(ids=tuple(ids), surface=self.surface, word_map=self.word_map)


def normalize_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise TreeValidityError(f"self-loop at node {i}")
    return (i, j) if i < j else (j, i)


def _check_spanning_tree(n_words, edges, sent_id=None):
    if n_words < 1:
        raise TreeValidityError("tree must cover at least one word", sent_id)
    if len(edges) != n_words - 1:
        raise TreeValidityError(
            f"{len(edges)} edges for {n_words} words (need n-1)", sent_id
        )
    parent = list(range(n_words))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        if not (0 <= i < n_words and 0 <= j < n_words):
            raise TreeValidityError(f"edge ({i},{j}) out of range", sent_id)
        ri, rj = find(i), find(j)
        if ri == rj:
            raise TreeValidityError(f"cycle through edge ({i},{j})", sent_id)
        parent[ri] = rj


@dataclass(frozen=True)
class GoldTree:
    """Undirected gold dependency tree with per-edge relation labels."""

    n_words: int
    edges: frozenset
    relations: dict = field(repr=False)

    def __post_init__(self):
        _check_spanning_tree(self.n_words, self.edges)
        missing = [e for e in self.edges if e not in self.relations]
        if missing:
            raise TreeValidityError(f"edges without relation label: {sorted(missing)}")

    @classmethod
    def from_edges(cls, n_words, labeled_edges) -> "GoldTree":
        edges = set()
        relations = {}
        for i, j, rel in labeled_edges:
            e = normalize_edge(i, j)
            edges.add(e)
            relations[e] = rel
        return cls(n_words=n_words, edges=frozenset(edges), relations=relations)


@dataclass(frozen=True)
class Lexicon:
    """Set of vocab ids used for cloze-style masking decisions."""

    ids: frozenset
    name: str = "lexicon"

    def __post_init__(self):
        if not self.ids:
            raise EmptyLexiconError(f"lexicon {self.name!r} is empty")

    def __contains__(self, token_id):
        return token_id in self.ids

    def __len__(self):
        return len(self.ids)


# ---------------------------------------------------------------------------
# CoNLL-U ingestion


def _tree_from_heads(heads, deprels, sent_id):
    n = len(heads)
    roots = [i for i, h in enumerate(heads) if h == 0]
    if len(roots) != 1:
        raise TreeValidityError(f"{len(roots)} root tokens (need exactly 1)", sent_id)
    labeled = []
    for child, h in enumerate(heads):
        if h == 0:
            continue  # virtual root attachment carries no edge
        if not (1 <= h <= n):
            raise TreeValidityError(f"head index {h} out of range", sent_id)
        labeled.append((h - 1, child, deprels[child]))
    try:
        return GoldTree.from_edges(n, labeled)
    except TreeValidityError as exc:
        raise TreeValidityError(str(exc), sent_id) from None


def load_conllu(path, vocab: Vocab | None = None):
    """Read a CoNLL-U file into (Sentence, GoldTree) pairs.

    Multiword-token ranges, empty nodes, and comments are skipped. When no
    vocab is supplied one is built from the file itself (min_count 1).
    """
    blocks = []
    surface, heads, deprels = [], [], []
    sent_id = None
    block_index = 0

    def flush():
        nonlocal surface, heads, deprels, sent_id, block_index
        if surface:
            block_index += 1
            blocks.append((surface, heads, deprels, sent_id or str(block_index)))
        surface, heads, deprels, sent_id = [], [], [], None

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                if "sent_id" in line and "=" in line:
                    sent_id = line.split("=", 1)[1].strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise ConlluParseError(
                    f"expected 10 tab-separated columns, got {len(cols)}", line_no
                )
            tok_id = cols[0]
            if "-" in tok_id or "." in tok_id:
                continue  # multiword range or empty node
            try:
                int(tok_id)
                head = int(cols[6])
            except ValueError:
                raise ConlluParseError(f"non-integer ID/HEAD in {tok_id!r}/{cols[6]!r}", line_no) from None
            surface.append(cols[1])
            heads.append(head)
            deprels.append(cols[7])
    flush()

    if vocab is None:
        vocab = build_vocab([s for s, _, _, _ in blocks], min_count=1)
    out = []
    for surf, hd, rel, sid in blocks:
        tree = _tree_from_heads(hd, rel, sid)
        out.append((vocab.sentence(surf), tree))
    return out


def build_vocab(corpus, min_count: int = 1) -> Vocab:
    """Frequency-filtered vocab; corpus items are strings or token sequences."""
    counts = Counter()
    n_items = 0
    for item in corpus:
        n_items += 1
        tokens = item.split() if isinstance(item, str) else list(item)
        counts.update(tokens)
    if n_items == 0:
        raise ConfigError("cannot build a vocab from an empty corpus")
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count and t not in SPECIAL_TOKENS),
        key=lambda t: (-counts[t], t),
    )
    return Vocab.from_words(kept)


def load_lexicon(path, vocab: Vocab):
    """Read one token per line (optional tab-separated extras ignored).

    Returns (Lexicon, dropped_count); raises EmptyLexiconError when every
    line falls outside the vocab.
    """
    ids = set()
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            token = raw.strip().split("\t")[0]
            if not token:
                continue
            tid = vocab.id_of.get(token)
            if tid is None or tid < len(SPECIAL_TOKENS):
                dropped += 1
            else:
                ids.add(tid)
    if not ids:
        raise EmptyLexiconError(f"no {Path(path).name} entries survived the vocab filter")
    return Lexicon(ids=frozenset(ids), name=Path(path).stem), dropped


# ---------------------------------------------------------------------------
# Synthetic dependency grammar


@dataclass(frozen=True)
class GrammarConfig:
    n_word_classes: int = 8
    vocab_per_class: int = 8
    n_topics: int = 4
    stop_prob: float = 0.72
    attach_concentration: float = 3.0
    max_len: int = 10
    min_len: int = 2
    seed: int = 0

    def __post_init__(self):
        if min(self.n_word_classes, self.vocab_per_class, self.n_topics) < 1:
            raise ConfigError("all grammar counts must be >= 1")
        if not (0.0 < self.stop_prob < 1.0):
            raise ConfigError("stop_prob must lie strictly inside (0, 1)")
        if self.attach_concentration <= 0:
            raise ConfigError("attach_concentration must be positive")
        if self.max_len < 2:
            raise ConfigError("max_len must be >= 2 so sentences can have an edge")
        if not (2 <= self.min_len <= self.max_len):
            raise ConfigError("need 2 <= min_len <= max_len")


def synthetic_vocab(cfg: GrammarConfig) -> Vocab:
    words = [
        f"t{c}x{k}"
        for c in range(cfg.n_word_classes)
        for k in range(cfg.vocab_per_class)
    ]
    return Vocab.from_words(words)


class _Budget:
    __slots__ = ("left",)

    def __init__(self, left):
        self.left = left


class _BudgetExceeded(Exception):
    pass


class _Node:
    __slots__ = ("cls", "token_k", "depth", "left", "right")

    def __init__(self, cls, token_k, depth):
        self.cls = cls
        self.token_k = token_k
        self.depth = depth
        self.left = []
        self.right = []


def _categorical(stream: Stream, cdf) -> int:
    return int(np.searchsorted(cdf, stream.random(), side="right"))


def _grammar_tables(cfg: GrammarConfig):
    tables = Stream.from_seed(cfg.seed, "grammar-tables")
    topic_prior = tables.dirichlet(np.ones(cfg.n_word_classes), size=cfg.n_topics)
    base_trans = tables.dirichlet(np.ones(cfg.n_word_classes), size=cfg.n_word_classes)
    # Child-class law: head transition sharpened by the attachment
    # concentration, reweighted by the topic prior (product of experts).
    child = np.empty((cfg.n_topics, cfg.n_word_classes, cfg.n_word_classes))
    for z in range(cfg.n_topics):
        w = (base_trans ** cfg.attach_concentration) * topic_prior[z][None, :]
        child[z] = w / w.sum(axis=1, keepdims=True)
    root_cdf = np.cumsum(topic_prior, axis=1)
    child_cdf = np.cumsum(child, axis=2)
    return root_cdf, child_cdf


def _expand(stream, node, topic, child_cdf, keep_prob, budget, cfg):
    for side in ("left", "right"):
        children = getattr(node, side)
        while stream.random() < keep_prob:
            if budget.left <= 0:
                raise _BudgetExceeded
            budget.left -= 1
            cls = _categorical(stream, child_cdf[topic, node.cls])
            tok = int(stream.integers(cfg.vocab_per_class))
            children.append(_Node(cls, tok, node.depth + 1))
    for c in node.left + node.right:
        _expand(stream, c, topic, child_cdf, keep_prob, budget, cfg)


def _flatten(node):
    order = []

    def visit(n):
        for c in reversed(n.left):
            visit(c)
        order.append(n)
        for c in n.right:
            visit(c)

    visit(node)
    return order


def _collect_edges(node, positions, edges):
    for side, children in (("L", node.left), ("R", node.right)):
        for c in children:
            rel = f"{side}dep{min(c.depth, 3)}"
            edges.append((positions[id(node)], positions[id(c)], rel))
            _collect_edges(c, positions, edges)


def gen_synthetic(cfg: GrammarConfig, n: int, vocab: Vocab | None = None):
    """Sample n sentences with gold trees from the latent-topic grammar.

    Deterministic in cfg.seed; sentence i does not depend on n. Each word's
    class is coupled to its head's class, and a per-sentence topic tilts
    every class draw, confounding all tokens.
    """
    if n < 1:
        raise ConfigError("need n >= 1")
    if vocab is None:
        vocab = synthetic_vocab(cfg)
    root_cdf, child_cdf = _grammar_tables(cfg)
    keep_prob = 1.0 - cfg.stop_prob
    pairs = []
    for idx in range(n):
        stream = Stream.from_seed(cfg.seed, "sentence", idx)
        for _attempt in range(1000):
            topic = int(stream.integers(cfg.n_topics))
            root = _Node(
                _categorical(stream, root_cdf[topic]),
                int(stream.integers(cfg.vocab_per_class)),
                0,
            )
            budget = _Budget(cfg.max_len - 1)
            try:
                _expand(stream, root, topic, child_cdf, keep_prob, budget, cfg)
            except _BudgetExceeded:
                continue
            order = _flatten(root)
            if len(order) < cfg.min_len:
                continue
            positions = {id(nd): p for p, nd in enumerate(order)}
            labeled = []
            _collect_edges(root, positions, labeled)
            tokens = [f"t{nd.cls}x{nd.token_k}" for nd in order]
            pairs.append(
                (vocab.sentence(tokens), GoldTree.from_edges(len(order), labeled))
            )
            break
        else:
            raise ConfigError(
                f"grammar rejected 1000 draws for sentence {idx}; "
                "config cannot produce 2 <= L <= max_len"
            )
    return pairs


# ---------------------------------------------------------------------------
# Case-study sentiment corpus

POSITIVE_WORDS = (
    "good", "great", "lovely", "superb", "charming", "moving", "brilliant",
    "delightful", "enjoyable", "touching", "clever", "fresh", "gripping",
    "warm", "elegant", "funny", "vivid", "crisp", "stunning", "graceful",
)
NEGATIVE_WORDS = (
    "bad", "awful", "dull", "bland", "tedious", "clumsy", "messy", "shallow",
    "stale", "weak", "tiresome", "grim", "hollow", "flat", "crude", "choppy",
    "sloppy", "lifeless", "forced", "murky",
)
LABEL_WORDS = ("negative", "positive")  # index = class label

_DET = ("the", "a")
_NOUN = ("movie", "film", "story", "plot", "script", "acting", "cast", "scene", "pacing", "ending")
_VERB = ("was", "felt", "seemed", "looked", "sounded")
_ADV = ("really", "very", "quite", "truly", "rather")
_CONJ = ("and", "but", "yet")

# Templates are slot sequences; POL slots receive sentiment-lexicon words.
_TEMPLATES = {
    1: (
        ("DET", "NOUN", "VERB", "ADV", "POL"),
        ("DET", "NOUN", "VERB", "POL"),
        ("ADV", "POL", "NOUN"),
    ),
    2: (
        ("DET", "NOUN", "VERB", "POL", "CONJ", "POL"),
        ("DET", "POL", "NOUN", "VERB", "ADV", "POL"),
        ("POL", "NOUN", "CONJ", "POL", "NOUN"),
    ),
    3: (
        ("DET", "NOUN", "VERB", "POL", "CONJ", "POL", "CONJ", "POL"),
        ("DET", "POL", "NOUN", "VERB", "POL", "CONJ", "POL"),
    ),
}
_SLOT_POOLS = {"DET": _DET, "NOUN": _NOUN, "VERB": _VERB, "ADV": _ADV, "CONJ": _CONJ}

# Word ranks follow a 1/(rank+1) law so rare sentiment words exist: a tiny
# finetuning set cannot see the whole lexicon, which is what makes
# pretraining matter for transfer.
_ZIPF = tuple(1.0 / (r + 1) for r in range(len(POSITIVE_WORDS)))


def case_study_vocab() -> Vocab:
    words = []
    for pool in (_DET, _NOUN, _VERB, _ADV, _CONJ):
        words.extend(pool)
    words.extend(POSITIVE_WORDS)
    words.extend(NEGATIVE_WORDS)
    words.extend(LABEL_WORDS)
    return Vocab.from_words(words)


def case_study_lexicon(vocab: Vocab) -> Lexicon:
    ids = frozenset(vocab.id_of[w] for w in POSITIVE_WORDS + NEGATIVE_WORDS)
    return Lexicon(ids=ids, name="sentiment")


@dataclass(frozen=True)
class CaseStudyCorpus:
    """Aligned sentiment corpus: appended[i] ends in its label word, plain[i] omits it."""

    appended: tuple
    plain: tuple
    vocab: Vocab
    lexicon: Lexicon


_ZIPF_CDF = np.cumsum(_ZIPF) / sum(_ZIPF)


def _zipf_pick(stream, words):
    return words[int(np.searchsorted(_ZIPF_CDF, stream.random(), side="right"))]


def gen_case_study(n: int, seed: int) -> CaseStudyCorpus:
    """Templated reviews with 1-3 sentiment words; label = majority polarity."""
    if n < 1:
        raise ConfigError("need n >= 1")
    vocab = case_study_vocab()
    lexicon = case_study_lexicon(vocab)
    appended, plain = [], []
    for idx in range(n):
        stream = Stream.from_seed(seed, "case-study", idx)
        label = int(stream.integers(2))
        k = 1 + int(stream.integers(3))
        template = _TEMPLATES[k][int(stream.integers(len(_TEMPLATES[k])))]
        majority = POSITIVE_WORDS if label == 1 else NEGATIVE_WORDS
        minority = NEGATIVE_WORDS if label == 1 else POSITIVE_WORDS
        if k == 3 and stream.random() < 0.5:
            polarity_plan = [majority, majority, minority]
        else:
            polarity_plan = [majority] * k
        order = stream.permutation(k)
        slot_words = [polarity_plan[order[s]] for s in range(k)]
        tokens = []
        pol_i = 0
        for slot in template:
            if slot == "POL":
                tokens.append(_zipf_pick(stream, slot_words[pol_i]))
                pol_i += 1
            else:
                pool = _SLOT_POOLS[slot]
                tokens.append(pool[int(stream.integers(len(pool)))])
        plain.append((vocab.sentence(tokens), label))
        appended.append((vocab.sentence(tokens + [LABEL_WORDS[label]]), label))
    return CaseStudyCorpus(
        appended=tuple(appended), plain=tuple(plain), vocab=vocab, lexicon=lexicon
    )


# ---------------------------------------------------------------------------
# Line-delimited JSON dump/load


def dump_treebank(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, tree in pairs:
            rec = {
                "surface": list(sentence.surface),
                "edges": [list(e) for e in sorted(tree.edges)],
                "relations": {f"{i}-{j}": tree.relations[(i, j)] for i, j in sorted(tree.edges)},
            }
            if sentence.word_map != tuple(range(len(sentence))):
                rec["word_map"] = list(sentence.word_map)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_treebank(path, vocab: Vocab):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            surface = rec["surface"]
            sentence = vocab.sentence(surface)
            if "word_map" in rec:
                sentence = Sentence(
                    ids=sentence.ids,
                    surface=sentence.surface,
                    word_map=tuple(rec["word_map"]),
                )
            n_words = sentence.n_words
            labeled = [
                (i, j, rec["relations"][f"{min(i, j)}-{max(i, j)}"])
                for i, j in rec["edges"]
            ]
            pairs.append((sentence, GoldTree.from_edges(n_words, labeled)))
    return pairs


def dump_labeled(items, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, label in items:
            fh.write(
                json.dumps({"surface": list(sentence.surface), "label": int(label)}, sort_keys=True)
                + "\n"
            )


def load_labeled(path, vocab: Vocab):
    items = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            items.append((vocab.sentence(rec["surface"]), int(rec["label"])))
    return items

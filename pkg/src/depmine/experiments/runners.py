"""Drivers for the four studies plus the proposition verification sweeps.

Every runner is a pure function of (config, seeds): corpora, model inits,
mask draws, and Gibbs chains all derive from named splits of the config
seeds, so re-runs reproduce results bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import spearmanr

from ..corpus import GrammarConfig, gen_case_study, gen_synthetic, synthetic_vocab
from ..dependence import DependenceMatrix, EstimatorConfig, PmiTable, dependence_matrix
from ..masking import Cloze, MixtureP, NoCloze, Uniform
from ..model import ModelDims, TinyMLM
from ..oracle import (
    discrete_gen,
    gaussian_gen,
    prop1_check,
    prop2_check,
    prop3_check,
    prop4_check,
)
from ..parsing import corpus_uuas, linear_chain, mst, random_tree, relation_recall
from ..rng import Stream, derive_key
from ..training import TrainConfig, finetune, train_mlm
from .config import ExperimentConfig
from .results import ResultTable

CASE_STUDY_PS = (0, 20, 40, 60, 80, 100)


def _dims_for(vocab, sentences) -> ModelDims:
    longest = max(len(s) for s in sentences)
    return ModelDims(vocab_size=len(vocab), max_len=longest + 1)


# ---------------------------------------------------------------------------
# Case study: mixing final-word masks with generic masks


def run_case_study(cfg: ExperimentConfig):
    cc, tc = cfg.corpus, cfg.train
    data = gen_case_study(cc["n_train"] + cc["n_dev"], cc["seed"])
    n_train = cc["n_train"]
    half = n_train // 2
    pretrain_sents = [s for s, _ in data.appended[:half]]
    finetune_set = list(data.plain[half:n_train])
    dev_set = list(data.plain[n_train:])
    dims = _dims_for(data.vocab, [s for s, _ in data.appended])

    conditions = [f"specific-{p}" for p in CASE_STUDY_PS] + ["no-pretrain"]
    table = ResultTable()
    for seed in cfg.seeds:
        for cond in conditions:
            model = TinyMLM.init(dims, Stream.from_seed(seed, "case-init", cond))
            if cond != "no-pretrain":
                p = int(cond.split("-")[1])
                pre_cfg = TrainConfig(
                    epochs=tc["pretrain_epochs"], batch_size=tc["batch_size"],
                    lr=tc["pretrain_lr"], seed=derive_key(seed, "case-pre", cond),
                )
                model, _ = train_mlm(model, pretrain_sents, MixtureP(p), pre_cfg)
            ft_cfg = TrainConfig(
                epochs=tc["finetune_epochs"], batch_size=tc["finetune_batch_size"],
                lr=tc["finetune_lr"], early_stop_patience=tc["early_stop_patience"],
                seed=derive_key(seed, "case-ft", cond),
            )
            result = finetune(model, finetune_set, dev_set, ft_cfg, n_classes=2)
            table.add(cond, seed, "accuracy", result.dev_accuracy)

    means = {c: table.mean(c, "accuracy") for c in conditions}
    rho = float(spearmanr(CASE_STUDY_PS, [means[f"specific-{p}"] for p in CASE_STUDY_PS]).statistic)
    checks = {
        "specific100_beats_nopretrain": means["specific-100"] > means["no-pretrain"],
        "specific100_beats_specific0": means["specific-100"] > means["specific-0"],
        "spearman_p_accuracy_ge_0.7": rho >= 0.7,
    }
    return table, checks


# ---------------------------------------------------------------------------
# Mask comparison: uniform vs cloze vs no-cloze second-stage pretraining


def _labeled_subset(pool, size, stream):
    for _attempt in range(100):
        idx = stream.choice(len(pool), size=size, replace=False)
        subset = [pool[int(i)] for i in sorted(idx)]
        if len({y for _, y in subset}) >= 2:
            return subset
    raise RuntimeError("could not draw a two-class finetuning subset")


def run_mask_compare(cfg: ExperimentConfig):
    cc, tc = cfg.corpus, cfg.train
    data = gen_case_study(cc["n_train"] + cc["n_dev"], cc["seed"])
    n_train = cc["n_train"]
    train_pool = list(data.plain[:n_train])
    dev_set = list(data.plain[n_train:])
    pretrain_sents = [s for s, _ in train_pool]
    dims = _dims_for(data.vocab, pretrain_sents)

    strategies = {
        "vanilla": None,
        "uniform": Uniform(rate=tc["uniform_rate"]),
        "cloze": Cloze(data.lexicon),
        "nocloze": NoCloze(data.lexicon),
    }
    table = ResultTable()
    for seed in cfg.seeds:
        subset = _labeled_subset(train_pool, cc["n_finetune"],
                                 Stream.from_seed(seed, "mask-cmp-subset"))
        for cond, strategy in strategies.items():
            model = TinyMLM.init(dims, Stream.from_seed(seed, "mask-cmp-init", cond))
            if strategy is not None:
                pre_cfg = TrainConfig(
                    epochs=tc["pretrain_epochs"], batch_size=tc["batch_size"],
                    lr=tc["pretrain_lr"], seed=derive_key(seed, "mask-cmp-pre", cond),
                )
                model, _ = train_mlm(model, pretrain_sents, strategy, pre_cfg)
            ft_cfg = TrainConfig(
                epochs=tc["finetune_epochs"], batch_size=tc["finetune_batch_size"],
                lr=tc["finetune_lr"], early_stop_patience=tc["early_stop_patience"],
                seed=derive_key(seed, "mask-cmp-ft", cond),
            )
            result = finetune(model, subset, dev_set, ft_cfg, n_classes=2)
            table.add(cond, seed, "accuracy", result.dev_accuracy)

    m = {c: table.mean(c, "accuracy") for c in strategies}
    checks = {
        "cloze_ge_uniform": m["cloze"] >= m["uniform"],
        "uniform_gt_vanilla": m["uniform"] > m["vanilla"],
        "uniform_closer_to_nocloze": abs(m["uniform"] - m["nocloze"]) < abs(m["uniform"] - m["cloze"]),
    }
    return table, checks


# ---------------------------------------------------------------------------
# Unsupervised parsing evaluation


def _parse_world(cfg: ExperimentConfig, n_eval_key):
    """Generate the grammar corpus and pretrain the uniform-mask MLM."""
    cc, tc = cfg.corpus, cfg.train
    grammar = GrammarConfig(seed=cc["seed"], **cc["grammar"])
    vocab = synthetic_vocab(grammar)
    pairs = gen_synthetic(grammar, cc["n_train"] + cc[n_eval_key], vocab)
    train_pairs = pairs[: cc["n_train"]]
    eval_pairs = pairs[cc["n_train"] :]
    train_sents = [s for s, _ in train_pairs]
    dims = ModelDims(vocab_size=len(vocab), max_len=grammar.max_len + 1)
    model = TinyMLM.init(dims, Stream.from_seed(tc["model_seed"], "parse-mlm-init"))
    pre_cfg = TrainConfig(epochs=tc["pretrain_epochs"], batch_size=tc["batch_size"],
                          lr=tc["pretrain_lr"], seed=tc["model_seed"])
    model, history = train_mlm(model, train_sents, Uniform(rate=tc["uniform_rate"]), pre_cfg)
    return {
        "vocab": vocab, "train_pairs": train_pairs, "eval_pairs": eval_pairs,
        "model": model, "mlm_loss": history[-1],
        "loss_budget": 0.6 * np.log(len(vocab)),
    }


def _score_trees(world, pairs, method, est_cfg: EstimatorConfig, chain_seed=0):
    """Parse every sentence with one method; returns the predicted trees."""
    if method == "pmi":
        pmi = PmiTable.from_corpus([s for s, _ in world["train_pairs"]])
    trees = []
    for idx, (sent, _gold) in enumerate(pairs):
        if method == "chain":
            trees.append(linear_chain(sent.n_words))
            continue
        if method == "random":
            trees.append(random_tree(sent.n_words, Stream.from_seed(chain_seed, "random-tree", idx)))
            continue
        if method == "pmi":
            matrix = dependence_matrix(pmi, sent, "pmi")
        elif method == "condpmi":
            matrix = dependence_matrix(world["model"], sent, "condpmi")
        elif method == "condmi":
            cfg = EstimatorConfig(gibbs_steps=est_cfg.gibbs_steps,
                                  burn_in=est_cfg.burn_in, seed=chain_seed)
            matrix = dependence_matrix(world["model"], sent, "condmi", cfg,
                                       stream=Stream.from_seed(chain_seed, "condmi-eval", idx))
        trees.append(mst(matrix))
    return trees


def run_parse_eval(cfg: ExperimentConfig):
    est = EstimatorConfig(gibbs_steps=cfg.estimator["gibbs_steps"],
                          burn_in=cfg.estimator["burn_in"])
    world = _parse_world(cfg, "n_eval")
    eval_pairs = world["eval_pairs"]
    golds = [g for _, g in eval_pairs]

    table = ResultTable()
    artifacts = {"world": world, "trees": {}}
    for method in ("chain", "pmi", "condpmi"):
        trees = _score_trees(world, eval_pairs, method, est)
        table.add(method, 0, "uuas", corpus_uuas(trees, golds))
        artifacts["trees"][method] = trees
    for method in ("random", "condmi"):
        for seed in cfg.seeds:
            trees = _score_trees(world, eval_pairs, method, est, chain_seed=seed)
            table.add(method, seed, "uuas", corpus_uuas(trees, golds))
            if seed == cfg.seeds[0]:
                artifacts["trees"][method] = trees

    m = {c: table.mean(c, "uuas") for c in ("random", "chain", "pmi", "condpmi", "condmi")}
    checks = {
        "mlm_loss_under_budget": world["mlm_loss"] < world["loss_budget"],
        "condmi_ge_pmi_plus_10pts": m["condmi"] >= m["pmi"] + 0.10,
        "condmi_ge_random_plus_20pts": m["condmi"] >= m["random"] + 0.20,
        "condmi_ge_condpmi": m["condmi"] >= m["condpmi"],
    }
    return table, checks, artifacts


# ---------------------------------------------------------------------------
# Relation-level analysis (conditional MI vs the adjacency baseline)


def run_relations(cfg: ExperimentConfig):
    est = EstimatorConfig(gibbs_steps=cfg.estimator["gibbs_steps"],
                          burn_in=cfg.estimator["burn_in"])
    world = _parse_world(cfg, "n_sentences")
    budget = min(cfg.corpus["n_sentences"], len(world["train_pairs"]))
    pairs = world["train_pairs"][:budget]
    golds = [g for _, g in pairs]
    trees = _score_trees(world, pairs, "condmi", est, chain_seed=cfg.seeds[0])
    report = relation_recall(trees, golds)

    gold_relations = {g.relations[e] for g in golds for e in g.edges}
    from ..parsing import log_odds_test

    flags_ok = True
    for row in report.rows:
        lo, sig = log_odds_test(row.method_hits, row.gold_count - row.method_hits,
                                row.chain_hits, row.gold_count - row.chain_hits)
        if sig != row.significant or abs(lo - row.log_odds) > 1e-12:
            flags_ok = False
    checks = {
        "covers_every_gold_relation": {r.relation for r in report.rows} == gold_relations,
        "significance_flags_consistent": flags_ok,
        "mlm_loss_under_budget": world["mlm_loss"] < world["loss_budget"],
    }
    return report, checks


# ---------------------------------------------------------------------------
# Proposition verification sweeps


def run_verify_props(cfg: ExperimentConfig):
    e = cfg.estimator
    reports = {"prop1": [], "prop2": [], "prop3": [], "prop4": []}

    for t in range(e["prop1_trials"]):
        m = gaussian_gen(n_obs=8, n_latent=3, n_edges=6, scale=0.4, seed=t)
        per_i = [prop1_check(m, i) for i in range(m.n_obs)]
        worst = min(per_i, key=lambda r: r.slack)
        reports["prop1"].append(worst)

    for t in range(e["prop2_trials"]):
        m = gaussian_gen(n_obs=8, n_latent=3, n_edges=5, scale=0.3, seed=50_000 + t,
                         orthonormal_a=True, z_var=25.0)
        reports["prop2"].append(prop2_check(m, e["prop2_samples"], Stream.from_seed(t, "prop2-mc")))

    shapes = ((2, 3, 4), (3, 3, 4), (4, 2, 3), (2, 4, 5), (3, 4, 3))
    for t in range(e["prop3_trials"]):
        n_z, length, vocab = shapes[t % len(shapes)]
        m = discrete_gen(n_z, length, vocab, seed=t)
        reports["prop3"].append(prop3_check(m, 0, 1))

    for t in range(e["prop4_trials"]):
        p = discrete_gen(1, 3, 4, seed=t)
        q = discrete_gen(1, 3, 4, seed=200_000 + t)
        reports["prop4"].append(prop4_check(p, q, 0, 1))

    checks = {f"{name}_all_hold": all(r.holds for r in rs) for name, rs in reports.items()}
    return reports, checks

"""Command-line entry points.

Experiment subcommands (case-study, mask-compare, parse-eval, relations,
verify-props) run a full study and exit non-zero when any embedded check
fails. train-mlm / finetune / score expose the underlying pipeline pieces
for ad-hoc use; all take JSON configs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .corpus import (
    GrammarConfig,
    build_vocab,
    gen_case_study,
    gen_synthetic,
    load_conllu,
    load_treebank,
    synthetic_vocab,
    Vocab,
)
from .dependence import EstimatorConfig, PmiTable, dependence_matrix
from .errors import DepmineError
from .experiments import (
    ExperimentConfig,
    emit_outputs,
    run_case_study,
    run_mask_compare,
    run_parse_eval,
    run_relations,
    run_verify_props,
)
from .masking import parse_strategy
from .model import ModelDims, TinyMLM, load_checkpoint, save_checkpoint
from .parsing import write_parses_json, write_parses_tsv
from .rng import Stream
from .training import TrainConfig, finetune, train_mlm


def _parse_seeds(text):
    if text is None:
        return None
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in text.split(",") if s.strip())


def _save_vocab(vocab: Vocab, path):
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")


def _load_vocab(path) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        tokens = tuple(line.rstrip("\n") for line in fh if line.rstrip("\n"))
    return Vocab(tokens=tokens, id_of={t: i for i, t in enumerate(tokens)})


def _corpus_from_config(spec):
    """Resolve a corpus spec to (sentences, gold_trees_or_None, vocab)."""
    if "synthetic" in spec:
        grammar = GrammarConfig(**spec["synthetic"])
        vocab = synthetic_vocab(grammar)
        pairs = gen_synthetic(grammar, spec.get("n", 1000), vocab)
        return [s for s, _ in pairs], [g for _, g in pairs], vocab
    if "conllu" in spec:
        pairs = load_conllu(spec["conllu"])
        vocab = build_vocab([s.surface for s, _ in pairs], min_count=1)
        pairs = load_conllu(spec["conllu"], vocab)
        return [s for s, _ in pairs], [g for _, g in pairs], vocab
    if "jsonl" in spec:
        vocab = _load_vocab(spec["vocab"])
        pairs = load_treebank(spec["jsonl"], vocab)
        return [s for s, _ in pairs], [g for _, g in pairs], vocab
    raise DepmineError(f"cannot resolve corpus spec {spec!r}")


# ---------------------------------------------------------------------------
# Experiment subcommands


def _write_prop_csvs(reports, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, rows in reports.items():
        with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "lhs", "rhs", "slack", "holds"])
            for t, r in enumerate(rows):
                w.writerow(r.row(t))


def _run_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config, experiment=args.experiment,
                                     seeds=_parse_seeds(args.seeds), out_dir=args.out)
    os.makedirs(cfg.out_dir, exist_ok=True)

    if cfg.experiment == "case-study":
        table, checks = run_case_study(cfg)
        emit_outputs(table, cfg.out_dir, "case-study", checks)
    elif cfg.experiment == "mask-compare":
        table, checks = run_mask_compare(cfg)
        emit_outputs(table, cfg.out_dir, "mask-compare", checks)
    elif cfg.experiment == "parse-eval":
        table, checks, artifacts = run_parse_eval(cfg)
        emit_outputs(table, cfg.out_dir, "parse-eval", checks)
        sents = [s for s, _ in artifacts["world"]["eval_pairs"]]
        trees = artifacts["trees"]["condmi"]
        write_parses_tsv(trees, sents, os.path.join(cfg.out_dir, "parses.tsv"))
        write_parses_json(trees, sents, os.path.join(cfg.out_dir, "parses.jsonl"))
    elif cfg.experiment == "relations":
        report, checks = run_relations(cfg)
        report.to_csv(os.path.join(cfg.out_dir, "relations.csv"))
        with open(os.path.join(cfg.out_dir, "results.json"), "w", encoding="utf-8") as fh:
            json.dump({"checks": {k: bool(v) for k, v in sorted(checks.items())}},
                      fh, sort_keys=True, indent=2)
            fh.write("\n")
    elif cfg.experiment == "verify-props":
        reports, checks = run_verify_props(cfg)
        _write_prop_csvs(reports, cfg.out_dir)
        with open(os.path.join(cfg.out_dir, "results.json"), "w", encoding="utf-8") as fh:
            json.dump({"checks": {k: bool(v) for k, v in sorted(checks.items())}},
                      fh, sort_keys=True, indent=2)
            fh.write("\n")

    for name, ok in sorted(checks.items()):
        print(f"[{'PASS' if ok else 'FAIL'}] {cfg.experiment}: {name}")
    return 0 if all(checks.values()) else 1


# ---------------------------------------------------------------------------
# Pipeline subcommands


def _cmd_train_mlm(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        spec = json.load(fh)
    sentences, _trees, vocab = _corpus_from_config(spec["corpus"])
    strategy = parse_strategy(spec.get("mask", "uniform:0.15"), vocab)
    tc = TrainConfig(**spec.get("train", {}))
    longest = max(len(s) for s in sentences)
    dims = ModelDims(vocab_size=len(vocab), max_len=longest + 1)
    model = TinyMLM.init(dims, Stream.from_seed(tc.seed, "cli-mlm-init"))
    model, history = train_mlm(model, sentences, strategy, tc)
    save_checkpoint(model, vocab, spec["checkpoint"])
    _save_vocab(vocab, spec["checkpoint"] + ".vocab.txt")
    print(f"final mlm loss: {history[-1]:.4f} (over {len(history)} epochs)")
    print(f"checkpoint: {spec['checkpoint']}")
    return 0


def _cmd_finetune(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        spec = json.load(fh)
    cs = spec["corpus"]["case_study"]
    data = gen_case_study(cs["n"], cs.get("seed", 0))
    n_dev = cs.get("n_dev", max(1, cs["n"] // 4))
    labeled = list(data.plain)
    train_set, dev_set = labeled[:-n_dev], labeled[-n_dev:]
    tc = TrainConfig(**{"lr": 1e-4, **spec.get("train", {})})
    if spec.get("checkpoint"):
        model = load_checkpoint(spec["checkpoint"], data.vocab)
    else:
        longest = max(len(s) for s, _ in labeled)
        dims = ModelDims(vocab_size=len(data.vocab), max_len=longest + 1)
        model = TinyMLM.init(dims, Stream.from_seed(tc.seed, "cli-ft-init"))
    result = finetune(model, train_set, dev_set, tc, n_classes=2)
    print(f"dev accuracy: {result.dev_accuracy:.4f} (best epoch {result.best_epoch})")
    if spec.get("out"):
        with open(spec["out"], "w", encoding="utf-8") as fh:
            json.dump({"dev_accuracy": result.dev_accuracy,
                       "best_epoch": result.best_epoch}, fh, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_score(args) -> int:
    vocab = _load_vocab(args.model + ".vocab.txt")
    model = load_checkpoint(args.model, vocab)
    pairs = load_treebank(args.corpus, vocab)
    sentences = [s for s, _ in pairs]
    est = EstimatorConfig(gibbs_steps=args.gibbs_steps, seed=args.seed)
    method = args.method
    pmi_table = PmiTable.from_corpus(sentences) if method == "pmi" else None
    with open(args.out, "w", encoding="utf-8") as fh:
        for idx, sent in enumerate(sentences):
            if method == "pmi":
                matrix = dependence_matrix(pmi_table, sent, "pmi")
            elif method == "condmi":
                matrix = dependence_matrix(model, sent, "condmi", est,
                                           stream=Stream.from_seed(args.seed, "condmi", idx))
            else:
                matrix = dependence_matrix(model, sent, method, est)
            fh.write(matrix.to_json() + "\n")
    print(f"wrote {len(sentences)} matrices to {args.out}")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="depmine")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("case-study", "mask-compare", "parse-eval", "relations", "verify-props"):
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seeds", default=None, help="e.g. 0..9 or 0,1,2")
        sp.set_defaults(func=_run_experiment, experiment=name)

    sp = sub.add_parser("train-mlm", help="pretrain a masked LM from a JSON config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=_cmd_train_mlm)

    sp = sub.add_parser("finetune", help="finetune a classifier from a JSON config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=_cmd_finetune)

    sp = sub.add_parser("score", help="write per-sentence dependence matrices")
    sp.add_argument("--model", required=True, help="checkpoint path")
    sp.add_argument("--corpus", required=True, help="treebank JSONL")
    sp.add_argument("--method", choices=("pmi", "condpmi", "condmi"), required=True)
    sp.add_argument("--gibbs-steps", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_score)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DepmineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

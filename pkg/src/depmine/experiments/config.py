"""Experiment configuration: one JSON-loadable record per run."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..errors import ConfigError

EXPERIMENTS = ("case-study", "mask-compare", "parse-eval", "relations", "verify-props")

# Per-experiment defaults; values here are calibrated for desk-scale runs.
_DEFAULTS = {
    "case-study": {
        "corpus": {"n_train": 560, "n_dev": 240, "seed": 11},
        "train": {
            "pretrain_epochs": 20, "finetune_epochs": 10, "batch_size": 32,
            "finetune_batch_size": 16, "pretrain_lr": 1e-3, "finetune_lr": 1e-4,
            "early_stop_patience": 3,
        },
        "estimator": {},
    },
    "mask-compare": {
        "corpus": {"n_train": 800, "n_dev": 240, "seed": 13, "n_finetune": 20},
        "train": {
            "pretrain_epochs": 12, "finetune_epochs": 10, "batch_size": 32,
            "finetune_batch_size": 8, "pretrain_lr": 1e-3, "finetune_lr": 1e-4,
            "early_stop_patience": 3, "uniform_rate": 0.15,
        },
        "estimator": {},
    },
    "parse-eval": {
        "corpus": {
            "n_train": 2500, "n_eval": 300, "seed": 17,
            "grammar": {
                "n_word_classes": 8, "vocab_per_class": 8, "n_topics": 4,
                "stop_prob": 0.72, "attach_concentration": 3.0, "max_len": 9,
            },
        },
        "train": {"pretrain_epochs": 30, "batch_size": 32, "pretrain_lr": 1e-3,
                  "uniform_rate": 0.15, "model_seed": 0},
        "estimator": {"gibbs_steps": 2000, "burn_in": 0},
    },
    "relations": {
        "corpus": {
            "n_train": 2500, "n_sentences": 300, "seed": 17,
            "grammar": {
                "n_word_classes": 8, "vocab_per_class": 8, "n_topics": 4,
                "stop_prob": 0.72, "attach_concentration": 3.0, "max_len": 9,
            },
        },
        "train": {"pretrain_epochs": 30, "batch_size": 32, "pretrain_lr": 1e-3,
                  "uniform_rate": 0.15, "model_seed": 0},
        "estimator": {"gibbs_steps": 2000, "burn_in": 0},
    },
    "verify-props": {
        "corpus": {},
        "train": {},
        "estimator": {
            "prop1_trials": 1000, "prop2_trials": 200, "prop2_samples": 10_000,
            "prop3_trials": 1000, "prop4_trials": 1000,
        },
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    seeds: tuple
    corpus: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    out_dir: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}"
            )
        if len(self.seeds) < 1:
            raise ConfigError("need at least one seed")
        defaults = _DEFAULTS[self.experiment]
        self.corpus = {**defaults["corpus"], **self.corpus}
        self.train = {**defaults["train"], **self.train}
        self.estimator = {**defaults["estimator"], **self.estimator}
        if "grammar" in defaults["corpus"]:
            merged = {**defaults["corpus"]["grammar"], **self.corpus.get("grammar", {})}
            self.corpus["grammar"] = merged
        for key in ("lexicon_path", "conllu_path"):
            path = self.corpus.get(key)
            if path and not os.path.exists(path):
                raise ConfigError(f"referenced file does not exist: {path}")

    @classmethod
    def default_seeds(cls, experiment) -> tuple:
        return {
            "case-study": tuple(range(10)),
            "mask-compare": tuple(range(20)),
            "parse-eval": (0, 1, 2),
            "relations": (0,),
            "verify-props": (0,),
        }[experiment]

    @classmethod
    def from_json(cls, path, experiment=None, seeds=None, out_dir=None) -> "ExperimentConfig":
        data = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        experiment = experiment or data.get("experiment")
        if experiment is None:
            raise ConfigError("config must name an experiment")
        if seeds is None:
            seeds = tuple(data.get("seeds", cls.default_seeds(experiment)))
        return cls(
            experiment=experiment,
            seeds=tuple(int(s) for s in seeds),
            corpus=data.get("corpus", {}),
            train=data.get("train", {}),
            estimator=data.get("estimator", {}),
            out_dir=out_dir or data.get("out_dir", "out"),
        )

"""INI experiment configuration with a validated, typed schema."""

from __future__ import annotations

import configparser
import os

from ..corpus import Corpus, generate_toy_task, load_pairs, subsample_semi_split
from ..dimcore import TrainingConfig
from ..errors import ContractError

# section -> key -> (type, default).  Defaults follow the documented
# search ranges: embedding {128,256}, hidden {256,512}, batch {10,16},
# beam {3,5}, patience 5, learning rates 0.001/0.00025, coupling 0.1 —
# scaled-down model sizes are used for the desk-scale toy task.
SCHEMA = {
    "data": {
        "task": (str, "toy"),
        "size": (int, 1000),
        "seed": (int, 0),
        "proportion": (float, 1.0),
        "unlabeled_side": (str, "both"),
        "format": (str, "tsv"),
        "train_path": (str, ""),
        "valid_path": (str, ""),
        "test_path": (str, ""),
    },
    "model": {
        "embed_dim": (int, 64),
        "hidden_dim": (int, 64),
        "lm_embed_dim": (int, 32),
        "lm_hidden_dim": (int, 64),
    },
    "training": {
        "lr_pretrain": (float, 0.001),
        "lr_joint": (float, 0.00025),
        "lm_lr": (float, 0.5),
        "batch_size": (int, 16),
        "patience": (int, 5),
        "beam_size": (int, 5),
        "max_decode_len": (int, 40),
        "clip_norm": (float, 5.0),
        "max_pretrain_epochs": (int, 50),
        "max_lm_epochs": (int, 30),
        "max_joint_epochs": (int, 20),
        "nl_min_count": (int, 2),
        "mr_min_count": (int, 1),
    },
    "dim": {
        "lambda": (float, 0.1),
        "estimator_mode": (str, "sampled"),
        "freeze_parser": (bool, False),
        "freeze_generator": (bool, False),
    },
    "analysis": {
        "bins": (int, 30),
        "lambdas": (str, "0,0.01,0.1,1"),
        "scale_100": (bool, False),
    },
}


def load_config(path: str) -> dict:
    """Parse and validate an INI file against the schema, filling defaults."""
    if not os.path.exists(path):
        raise ContractError(f"config file not found: {path}")
    ini = configparser.ConfigParser()
    try:
        ini.read(path)
    except configparser.Error as exc:
        raise ContractError(f"{path}: {exc}")
    cfg = {sect: {key: default for key, (_, default) in keys.items()}
           for sect, keys in SCHEMA.items()}
    for sect in ini.sections():
        if sect not in SCHEMA:
            raise ContractError(f"{path}: unknown section [{sect}]")
        for key, raw in ini[sect].items():
            if key not in SCHEMA[sect]:
                raise ContractError(f"{path}: unknown key {key!r} in [{sect}]")
            typ, _ = SCHEMA[sect][key]
            try:
                if typ is bool:
                    cfg[sect][key] = ini[sect].getboolean(key)
                else:
                    cfg[sect][key] = typ(raw)
            except ValueError:
                raise ContractError(
                    f"{path}: [{sect}] {key} = {raw!r} is not a valid {typ.__name__}")
    return cfg


def training_config(cfg: dict, **overrides) -> TrainingConfig:
    fields = dict(
        lam=cfg["dim"]["lambda"],
        estimator_mode=cfg["dim"]["estimator_mode"],
        freeze_parser=cfg["dim"]["freeze_parser"],
        freeze_generator=cfg["dim"]["freeze_generator"],
        seed=cfg["data"]["seed"],
        embed_dim=cfg["model"]["embed_dim"],
        hidden_dim=cfg["model"]["hidden_dim"],
        lm_embed_dim=cfg["model"]["lm_embed_dim"],
        lm_hidden_dim=cfg["model"]["lm_hidden_dim"],
        **cfg["training"],
    )
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return TrainingConfig(**fields)


def build_corpus(cfg: dict) -> Corpus:
    """Corpus described by the [data] section, semi-split applied if asked.

    When proportion < 1, the discarded pairs are kept (with their gold
    targets) under meta["heldout_pairs"] for rank analysis.
    """
    data = cfg["data"]
    if data["task"] == "toy":
        corpus = generate_toy_task(seed=data["seed"], size=data["size"])
    elif data["task"] == "pairs":
        for field in ("train_path", "valid_path", "test_path"):
            if not data[field]:
                raise ContractError(f"[data] {field} required for task=pairs")
        corpus = Corpus(
            train=load_pairs(data["train_path"], data["format"]),
            valid=load_pairs(data["valid_path"], data["format"]),
            test=load_pairs(data["test_path"], data["format"]),
        )
    else:
        raise ContractError(f"unknown [data] task {data['task']!r}")

    if data["proportion"] < 1.0:
        semi = subsample_semi_split(corpus.train, data["proportion"],
                                    data["seed"], data["unlabeled_side"])
        heldout = {o for o in semi.meta["unlabeled_origins"]}
        semi.meta["heldout_pairs"] = [
            (list(ex.nl), list(ex.mr))
            for ex in corpus.train if ex.origin in heldout
        ]
        semi.valid, semi.test = corpus.valid, corpus.test
        semi.meta.update({k: v for k, v in corpus.meta.items()
                          if k not in semi.meta})
        return semi
    return corpus

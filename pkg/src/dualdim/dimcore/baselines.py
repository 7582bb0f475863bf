"""Pseudo-labeling baselines: self-training and back-translation boosting.

Both construct pseudo pairs for unlabeled sequences via top-1 beam
decoding, mix them with the labeled pairs at weight one, and fine-tune
with the supervised objective.
"""

from __future__ import annotations

from ..errors import ContractError
from ..seqmodels import beam_search
from .training import TrainingConfig, supervised_pretrain


def make_pseudo_pairs(decoder, sources, config: TrainingConfig,
                      as_source: bool = True):
    """One pseudo pair per sequence from the decoder's top-1 hypothesis.

    With as_source=True the decoded output becomes the target (self
    training); otherwise it becomes the source (back boosting).
    """
    pairs = []
    for seq in sources:
        hyps = beam_search(decoder, list(seq), config.beam_size,
                           config.max_decode_len)
        decoded = list(hyps[0].tokens) if hyps else []
        pairs.append((list(seq), decoded) if as_source else (decoded, list(seq)))
    return pairs


def _finetune(model, pairs, valid_pairs, config: TrainingConfig, name: str):
    if not pairs:
        raise ContractError("fine-tuning requires at least one pair")
    supervised_pretrain(model, pairs, valid_pairs, config,
                        lr=config.lr_joint,
                        max_epochs=config.max_joint_epochs,
                        name=name)
    return model


def self_train(model, labeled_pairs, unlabeled_sources, config: TrainingConfig,
               valid_pairs):
    """Fine-tune on labeled pairs plus the model's own pseudo-labeled pairs."""
    pseudo = make_pseudo_pairs(model, unlabeled_sources, config, as_source=True)
    mixed = [(list(s), list(t)) for s, t in labeled_pairs] + pseudo
    return _finetune(model, mixed, valid_pairs, config, "self-train")


def back_boost(model, labeled_pairs, unlabeled_targets, dual_model,
               config: TrainingConfig, valid_pairs):
    """Fine-tune on labeled pairs plus pairs whose sources the dual decoded."""
    pseudo = make_pseudo_pairs(dual_model, unlabeled_targets, config,
                               as_source=False)
    mixed = [(list(s), list(t)) for s, t in labeled_pairs] + pseudo
    return _finetune(model, mixed, valid_pairs, config, "back-boost")

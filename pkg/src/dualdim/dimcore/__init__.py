"""Dual-information training: signals, baselines, joint procedures."""

from .signals import (
    BaselineState,
    LearningSignal,
    SamplePool,
    baseline_update,
    learning_signal,
    lower_bound_estimate,
)
from .training import (
    TrainedModels,
    TrainingConfig,
    build_pool,
    dim_update_direction,
    evaluate_generator_bleu,
    evaluate_parser_accuracy,
    joint_train_step,
    pretrain_then_joint,
    semidim_train_step,
    supervised_pretrain,
    write_trace,
)
from .baselines import back_boost, make_pseudo_pairs, self_train

__all__ = [
    "BaselineState",
    "LearningSignal",
    "SamplePool",
    "TrainedModels",
    "TrainingConfig",
    "back_boost",
    "baseline_update",
    "build_pool",
    "dim_update_direction",
    "evaluate_generator_bleu",
    "evaluate_parser_accuracy",
    "joint_train_step",
    "learning_signal",
    "lower_bound_estimate",
    "make_pseudo_pairs",
    "pretrain_then_joint",
    "self_train",
    "semidim_train_step",
    "supervised_pretrain",
    "write_trace",
]

"""Learning signals, running-mean baselines, and lower-bound estimates.

A candidate target's learning signal combines how well the dual model
reconstructs the source from it with how plausible the candidate is
under a frozen marginal language model, centered by a running-mean
baseline.  Pooled signals also yield a sample estimate of the
variational lower bound on the expected log-joint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .. import oracle as orc


@dataclass(frozen=True)
class LearningSignal:
    dual_logprob: float
    marginal_logprob: float
    baseline_at_use: float

    @property
    def raw(self) -> float:
        return self.dual_logprob + self.marginal_logprob

    @property
    def value(self) -> float:
        return self.raw - self.baseline_at_use


@dataclass
class BaselineState:
    """Running arithmetic mean of raw signals, one instance per direction."""

    direction: str = "e"
    running_mean: float = 0.0
    count: int = 0


@dataclass
class SamplePool:
    """Beam-search candidates for one source, with lazily-filled signals."""

    source: list[str]
    hypotheses: list = field(default_factory=list)
    signals: list[LearningSignal] | None = None


def baseline_update(state: BaselineState, raw_signal: float) -> BaselineState:
    if not math.isfinite(raw_signal):
        raise ContractError(f"baseline_update: non-finite signal {raw_signal}")
    state.count += 1
    state.running_mean += (raw_signal - state.running_mean) / state.count
    return state


def learning_signal(source_tokens, candidate_tokens, dual_model, marginal_lm,
                    baseline: BaselineState) -> LearningSignal:
    """Signal for one candidate: dual reconstruction + marginal, minus baseline.

    The raw (pre-baseline) part is exposed as `.raw` for baseline_update.
    """
    if not candidate_tokens:
        raise ContractError("learning_signal: empty candidate")
    dual_lp = orc.cond_logprob(dual_model, list(candidate_tokens), list(source_tokens))
    marg_lp = orc.marginal_logprob(marginal_lm, list(candidate_tokens))
    return LearningSignal(dual_lp, marg_lp, baseline.running_mean)


def lower_bound_estimate(direction: str, pool: SamplePool, dual_model,
                         marginal_lm, mode: str = "sampled", primal=None,
                         space=None) -> float:
    """Estimate of the variational lower bound for one source.

    In "sampled" mode: the uniform average of (dual + marginal) log-probs
    over the candidate pool.  In "exact" mode: the probability-weighted
    sum over an exhaustively enumerated target space, using the primal
    model's space-renormalized conditional.
    """
    if mode == "sampled":
        if not pool.hypotheses:
            raise ContractError("lower_bound_estimate: empty pool")
        signals = pool.signals
        if signals is None:
            dummy = BaselineState(direction)
            signals = [learning_signal(pool.source, list(h.tokens), dual_model,
                                       marginal_lm, dummy)
                       for h in pool.hypotheses]
        return float(np.mean([s.raw for s in signals]))
    if mode == "exact":
        if primal is None or space is None:
            raise ContractError("exact mode needs the primal model and a space")
        probs = orc.conditional_over_space(primal, pool.source, space)
        rewards = np.array([
            orc.cond_logprob(dual_model, y, pool.source)
            + orc.marginal_logprob(marginal_lm, y)
            for y in space.sequences
        ])
        return float(probs @ rewards)
    raise ContractError(f"unknown estimator mode {mode!r}")

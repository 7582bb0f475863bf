"""Exhaustive-enumeration ground truth on tiny sequence spaces.

These routines make expectations, bound/KL decompositions, policy
gradients and top-K sets exactly computable, so the sampling-based
training code can be checked against closed-form sums.

Two conventions apply throughout:

* Conditional model distributions are renormalized over the enumerated
  space.  A sequence model leaks probability mass onto sequences longer
  than ``max_len`` (and onto reserved tokens), so raw per-sequence
  probabilities do not sum to one over a truncated space; renormalizing
  yields a proper distribution, which the score-function identity and
  the total-mass invariants require.  Raw (unrenormalized) log-scores
  are still what ranking and the variational side use.
* Conditioning on the empty sequence feeds the EOS token as the sole
  source symbol, since the encoders reject empty inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .errors import ContractError
from .seqmodels.vocab import EOS, RESERVED

MAX_VOCAB = 6
MAX_LEN = 4


@dataclass
class TinySpace:
    tokens: tuple[str, ...]
    max_len: int
    sequences: list[tuple[str, ...]] = field(default_factory=list)

    def __len__(self):
        return len(self.sequences)


def enumerate_space(tokens, max_len: int) -> TinySpace:
    """All EOS-terminated sequences of total length <= max_len.

    `tokens` are the content symbols; the empty sequence (bare EOS) is
    included.  Limits keep downstream O(|space|^2) sweeps tractable.
    """
    tokens = tuple(tokens)
    if len(tokens) > MAX_VOCAB or max_len > MAX_LEN:
        raise ContractError(
            f"enumeration limits exceeded: V={len(tokens)} (max {MAX_VOCAB}), "
            f"max_len={max_len} (max {MAX_LEN})")
    if any(t in RESERVED for t in tokens):
        raise ContractError("content tokens must not be reserved symbols")
    seqs: list[tuple[str, ...]] = [()]
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(max_len - 1):
        frontier = [seq + (t,) for seq in frontier for t in tokens]
        seqs.extend(frontier)
    return TinySpace(tokens, max_len, seqs)


def cond_logprob(model, src, tgt) -> float:
    """Raw log p(tgt | src); model may be a Seq2SeqModel or a callable."""
    if callable(model) and not hasattr(model, "sequence_log_prob"):
        return float(model(tuple(src), tuple(tgt)))
    src = list(src) if src else [EOS]
    return model.sequence_log_prob(src, list(tgt)).item()


def marginal_logprob(marginal, seq) -> float:
    """Raw log q(seq); marginal may be an LM, an ExplicitMarginal or a callable."""
    if hasattr(marginal, "log_prob"):
        return float(marginal.log_prob(list(seq)))
    return float(marginal(tuple(seq)))


class ExplicitMarginal:
    """Finite distribution over sequences, given as an explicit table."""

    def __init__(self, probs: dict[tuple[str, ...], float], normalized: bool = True):
        total = sum(probs.values())
        if normalized and abs(total - 1.0) > 1e-9:
            raise ContractError(f"marginal table sums to {total}, expected 1")
        self.probs = {tuple(k): float(v) for k, v in probs.items()}

    def prob(self, seq) -> float:
        return self.probs.get(tuple(seq), 0.0)

    def log_prob(self, seq) -> float:
        p = self.prob(seq)
        return math.log(p) if p > 0 else -math.inf

    def support(self):
        return [s for s, p in self.probs.items() if p > 0]


def conditional_over_space(model, src, space: TinySpace) -> np.ndarray:
    """Space-renormalized conditional distribution p~(y | src)."""
    lps = np.array([cond_logprob(model, src, y) for y in space.sequences])
    shifted = np.exp(lps - lps.max())
    return shifted / shifted.sum()


@dataclass
class JointTable:
    """p(x, y) = p(x) * p~(y | x) over an enumerated target space."""

    xs: list[tuple[str, ...]]
    ys: list[tuple[str, ...]]
    p_x: np.ndarray          # (|X|,)
    table: np.ndarray        # (|X|, |Y|)

    def marginal_y(self) -> np.ndarray:
        return self.table.sum(axis=0)


def exact_joint_e(p_x: ExplicitMarginal, parser, space: TinySpace) -> JointTable:
    """Full joint table; row sums recover the source marginal."""
    xs = p_x.support()
    px = np.array([p_x.prob(x) for x in xs])
    if abs(px.sum() - 1.0) > 1e-9:
        raise ContractError(f"source marginal sums to {px.sum()}, expected 1")
    table = np.stack([p * conditional_over_space(parser, x, space) for x, p in zip(xs, px)])
    return JointTable(xs, list(space.sequences), px, table)


@dataclass
class ExactDecomposition:
    expected_log_joint: float
    bound: float
    kl_conditional: float
    kl_marginal: float
    infinite_kl: bool = False

    def identity_residual(self) -> float:
        return abs(self.expected_log_joint
                   - (self.bound + self.kl_conditional + self.kl_marginal))


def exact_lower_bound_and_kl_decomposition(joint: JointTable, generator,
                                           q_y) -> ExactDecomposition:
    """Exhaustive evaluation of the bound and its two KL gap terms.

    `generator` supplies log q(x|y), `q_y` supplies log q(y); both may be
    subnormalized over the space (a truncated sequence model), which
    keeps the KL terms nonnegative.  Zero-probability pairs contribute
    nothing; a support mismatch is reported via `infinite_kl`.
    """
    P = joint.table
    total = P.sum()
    if abs(total - 1.0) > 1e-9:
        raise ContractError(f"joint table mass is {total}, expected 1")
    py = joint.marginal_y()

    expected_log_joint = 0.0
    bound = 0.0
    kl_conditional = 0.0
    infinite = False
    for i, x in enumerate(joint.xs):
        for j, y in enumerate(joint.ys):
            p = P[i, j]
            if p <= 0.0:
                continue
            lq = cond_logprob(generator, y, x)
            lqy = marginal_logprob(q_y, y)
            if not np.isfinite(lq) or not np.isfinite(lqy):
                infinite = True
                continue
            expected_log_joint += p * math.log(p)
            bound += p * (lq + lqy)
            # KL(p(x|y) || q(x|y)) weighted by p(y): p(x|y) = p / p(y)
            kl_conditional += p * (math.log(p / py[j]) - lq)
    kl_marginal = 0.0
    for j, y in enumerate(joint.ys):
        if py[j] <= 0.0:
            continue
        lqy = marginal_logprob(q_y, y)
        if not np.isfinite(lqy):
            infinite = True
            continue
        kl_marginal += py[j] * (math.log(py[j]) - lqy)
    if infinite:
        return ExactDecomposition(math.nan, math.nan, math.inf, math.inf, True)
    return ExactDecomposition(expected_log_joint, bound, kl_conditional, kl_marginal)


def exact_policy_gradient(p_x: ExplicitMarginal, parser, generator, q_y,
                          space: TinySpace):
    """Exact ascent gradients of the bound for the primal and dual model.

    Primal: sum_x p(x) sum_y p~(y|x) grad log p~(y|x) * (log q(x|y) + log q(y)).
    Dual:   sum_x p(x) sum_y p~(y|x) grad log q(x|y).
    Each inner sum runs one tape over every enumerated pair and weights
    the per-pair backward results.
    """
    grad_theta: dict[str, np.ndarray] = {}
    grad_phi: dict[str, np.ndarray] = {}
    for x in p_x.support():
        px = p_x.prob(x)
        rewards = np.array([
            cond_logprob(generator, y, x) + marginal_logprob(q_y, y)
            for y in space.sequences
        ])
        src = list(x) if x else [EOS]

        with dc.Tape() as tape:
            lps = dc.concat([parser.sequence_log_prob(src, list(y))
                             for y in space.sequences], axis=1)
            norm_lps = dc.log_softmax(lps)
            probs = np.exp(norm_lps.data[0])
            weights = (probs * rewards).reshape(-1, 1)
            loss = dc.matmul(norm_lps, dc.Tensor(weights))
        dc.backward(tape, loss)
        dc.accumulate(grad_theta, parser.params.grads_from_tape(tape), px)

        if not hasattr(generator, "sequence_log_prob"):
            continue  # explicit-table dual model: no phi gradient to take
        with dc.Tape() as tape:
            lqs = dc.concat([generator.sequence_log_prob(list(y) if y else [EOS], list(x))
                             for y in space.sequences], axis=1)
            loss = dc.matmul(lqs, dc.Tensor(probs.reshape(-1, 1)))
        dc.backward(tape, loss)
        dc.accumulate(grad_phi, generator.params.grads_from_tape(tape), px)
    return grad_theta, grad_phi


def exact_top_k(parser, x, space: TinySpace, k: int):
    """Highest-probability sequences by exhaustive raw scoring.

    Returns (sequence, raw log-prob) pairs; ties break lexicographically
    on target token ids, matching beam search.
    """
    src = list(x) if x else [EOS]
    scored = [(y, parser.sequence_log_prob(src, list(y)).item())
              for y in space.sequences]
    scored.sort(key=lambda item: (-item[1], tuple(parser.tgt_vocab.ids(item[0]))))
    return scored[:k]

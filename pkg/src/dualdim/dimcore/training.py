"""Joint training of a parser and generator with dual-information terms.

Each joint step takes supervised gradient steps on both models, then —
for positive coupling weight — adds REINFORCE-style updates that push
each model's samples toward candidates the dual model and a frozen
marginal language model score highly.  The same code path handles the
semi-supervised variant by pooling unlabeled sequences into the sampled
sides.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import diffcore as dc
from .. import oracle as orc
from ..corpus import Corpus, build_vocab
from ..errors import ContractError
from ..rng import substream
from ..seqmodels import (
    MarginalLM,
    Seq2SeqModel,
    beam_search,
    lm_pretrain,
    supervised_loss,
)
from .signals import (
    BaselineState,
    SamplePool,
    baseline_update,
    learning_signal,
    lower_bound_estimate,
)

logger = logging.getLogger("dualdim.dimcore")


@dataclass
class TrainingConfig:
    lam: float = 0.1
    beam_size: int = 5
    lr_pretrain: float = 0.001
    lr_joint: float = 0.00025
    lm_lr: float = 0.5
    batch_size: int = 16
    patience: int = 5
    estimator_mode: str = "sampled"
    seed: int = 0
    embed_dim: int = 64
    hidden_dim: int = 64
    lm_embed_dim: int = 32
    lm_hidden_dim: int = 64
    max_decode_len: int = 40
    clip_norm: float = 5.0
    max_pretrain_epochs: int = 50
    max_lm_epochs: int = 30
    max_joint_epochs: int = 20
    nl_min_count: int = 2
    mr_min_count: int = 1
    freeze_parser: bool = False
    freeze_generator: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ContractError("lam must be >= 0")
        if self.beam_size < 1:
            raise ContractError("beam_size must be >= 1")
        if self.patience < 1:
            raise ContractError("patience must be >= 1")
        if self.estimator_mode not in ("sampled", "exact"):
            raise ContractError(f"unknown estimator mode {self.estimator_mode!r}")


def build_pool(primal, source_tokens, config: TrainingConfig) -> SamplePool:
    """Finished, non-empty beam candidates for one source."""
    hyps = beam_search(primal, list(source_tokens), config.beam_size,
                       config.max_decode_len)
    kept = [h for h in hyps if h.finished and h.tokens]
    return SamplePool(source=list(source_tokens), hypotheses=kept)


def _descent_grads(store, tape) -> dict[str, np.ndarray]:
    return store.params.grads_from_tape(tape)


def dim_update_direction(primal, dual, marginal_lm, source_tokens,
                         config: TrainingConfig, baseline: BaselineState,
                         space=None):
    """Descent gradients for one source, one direction.

    Returns (primal grads, dual grads, pool).  In "sampled" mode the pool
    comes from beam search and candidates are weighted uniformly with
    baseline-centered signals; in "exact" mode (tiny spaces only) both
    gradients are probability-weighted sums over a full enumeration.
    """
    if config.estimator_mode == "exact":
        return _exact_update_direction(primal, dual, marginal_lm,
                                       source_tokens, baseline, space)

    pool = build_pool(primal, source_tokens, config)
    if not pool.hypotheses:
        logger.warning("empty candidate pool for source %r; step skipped",
                       " ".join(source_tokens))
        return {}, {}, pool
    src = list(source_tokens)
    signals = [learning_signal(src, list(h.tokens), dual, marginal_lm, baseline)
               for h in pool.hypotheses]
    pool.signals = signals
    n = len(pool.hypotheses)

    with dc.Tape() as tape:
        lps = dc.concat([primal.sequence_log_prob(src, list(h.tokens))
                         for h in pool.hypotheses], axis=1)
        weights = np.array([-s.value / n for s in signals]).reshape(-1, 1)
        loss = dc.matmul(lps, dc.Tensor(weights))
    dc.backward(tape, loss)
    grads_primal = _descent_grads(primal, tape)

    grads_dual: dict[str, np.ndarray] = {}
    if hasattr(dual, "sequence_log_prob"):
        with dc.Tape() as tape:
            lqs = dc.concat([dual.sequence_log_prob(list(h.tokens), src)
                             for h in pool.hypotheses], axis=1)
            loss = dc.scale(dc.neg(dc.tsum(lqs)), 1.0 / n)
        dc.backward(tape, loss)
        grads_dual = _descent_grads(dual, tape)

    for s in signals:
        baseline_update(baseline, s.raw)
    return grads_primal, grads_dual, pool


def _exact_update_direction(primal, dual, marginal_lm, source_tokens,
                            baseline: BaselineState, space):
    """Exhaustive probability-weighted gradients on a tiny enumerated space.

    The primal gradient differentiates directly through the renormalized
    candidate distribution — a different route than the score-function
    form, so the two can cross-check each other.
    """
    if space is None:
        raise ContractError("exact estimator mode requires an enumerated space")
    src = list(source_tokens)
    rewards = np.array([
        orc.cond_logprob(dual, y, src) + orc.marginal_logprob(marginal_lm, y)
        - baseline.running_mean
        for y in space.sequences
    ])

    with dc.Tape() as tape:
        lps = dc.concat([primal.sequence_log_prob(src, list(y))
                         for y in space.sequences], axis=1)
        probs = dc.softmax(lps)
        loss = dc.neg(dc.matmul(probs, dc.Tensor(rewards.reshape(-1, 1))))
    dc.backward(tape, loss)
    grads_primal = _descent_grads(primal, tape)

    grads_dual: dict[str, np.ndarray] = {}
    if hasattr(dual, "params"):
        weights = orc.conditional_over_space(primal, src, space)
        with dc.Tape() as tape:
            lqs = dc.concat([
                dual.sequence_log_prob(list(y) if y else [orc.EOS], src)
                for y in space.sequences
            ], axis=1)
            loss = dc.neg(dc.matmul(lqs, dc.Tensor(weights.reshape(-1, 1))))
        dc.backward(tape, loss)
        grads_dual = _descent_grads(dual, tape)

    pool = SamplePool(source=src, hypotheses=[])
    return grads_primal, grads_dual, pool


def _apply(model, grads, lr: float, config: TrainingConfig, frozen: bool):
    if frozen or not grads:
        return
    dc.adam_step(model.params, dc.clip_grad_norm(grads, config.clip_norm), lr)


def semidim_train_step(parser, generator, p_lm, q_lm, labeled_batch,
                       unlabeled_x, unlabeled_y, config: TrainingConfig,
                       baselines: dict[str, BaselineState]) -> dict:
    """One joint step over a labeled batch plus unlabeled pools.

    Supervised terms use only the labeled pairs; the coupling terms run
    over all x-side sequences (labeled + unlabeled) in the parser→
    generator direction and all y-side sequences in the reverse one.
    Returns the step's loss components.
    """
    out = {"sup_parser": None, "sup_generator": None,
           "bound_e": None, "bound_d": None}

    if labeled_batch:
        with dc.Tape() as tape:
            loss = supervised_loss(parser, [(ex.nl, ex.mr) for ex in labeled_batch])
        dc.backward(tape, loss)
        _apply(parser, _descent_grads(parser, tape), config.lr_joint, config,
               config.freeze_parser)
        out["sup_parser"] = loss.item()

        with dc.Tape() as tape:
            loss = supervised_loss(generator, [(ex.mr, ex.nl) for ex in labeled_batch])
        dc.backward(tape, loss)
        _apply(generator, _descent_grads(generator, tape), config.lr_joint, config,
               config.freeze_generator)
        out["sup_generator"] = loss.item()

    if config.lam > 0:
        d_x = [list(ex.nl) for ex in labeled_batch] + [list(s) for s in unlabeled_x]
        d_y = [list(ex.mr) for ex in labeled_batch] + [list(s) for s in unlabeled_y]

        out["bound_e"] = _dim_direction_pass(
            parser, generator, q_lm, d_x, config, baselines["e"],
            primal_frozen=config.freeze_parser,
            dual_frozen=config.freeze_generator)
        out["bound_d"] = _dim_direction_pass(
            generator, parser, p_lm, d_y, config, baselines["d"],
            primal_frozen=config.freeze_generator,
            dual_frozen=config.freeze_parser)

    out["baseline_e"] = baselines["e"].running_mean
    out["baseline_d"] = baselines["d"].running_mean
    return out


def _dim_direction_pass(primal, dual, marginal_lm, sources, config,
                        baseline, primal_frozen, dual_frozen):
    if not sources:
        return None
    acc_primal: dict[str, np.ndarray] = {}
    acc_dual: dict[str, np.ndarray] = {}
    bounds = []
    scale = config.lam / len(sources)
    for src in sources:
        g_p, g_d, pool = dim_update_direction(primal, dual, marginal_lm, src,
                                              config, baseline)
        dc.accumulate(acc_primal, g_p, scale)
        dc.accumulate(acc_dual, g_d, scale)
        if pool.signals:
            bounds.append(lower_bound_estimate(baseline.direction, pool,
                                               dual, marginal_lm))
    _apply(primal, acc_primal, config.lr_joint, config, primal_frozen)
    _apply(dual, acc_dual, config.lr_joint, config, dual_frozen)
    return float(np.mean(bounds)) if bounds else None


def joint_train_step(parser, generator, p_lm, q_lm, labeled_batch,
                     config: TrainingConfig,
                     baselines: dict[str, BaselineState]) -> dict:
    """Fully supervised joint step; the semi-supervised step with empty pools."""
    return semidim_train_step(parser, generator, p_lm, q_lm, labeled_batch,
                              [], [], config, baselines)


# ---------------------------------------------------------------------------
# Full training procedure


def _batches(items, batch_size, rng):
    order = rng.permutation(len(items))
    for start in range(0, len(items), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]


def supervised_pretrain(model, pairs, valid_pairs, config: TrainingConfig,
                        lr=None, max_epochs=None, trace=None, name="model",
                        rng=None):
    """Adam training on (source, target) pairs with validation-loss patience.

    Restores the best-validation parameters before returning.
    """
    if not pairs or not valid_pairs:
        raise ContractError("supervised_pretrain: empty split")
    lr = config.lr_pretrain if lr is None else lr
    max_epochs = config.max_pretrain_epochs if max_epochs is None else max_epochs
    rng = rng or substream(config.seed, f"pretrain-{name}")
    best = model.params.copy()
    best_loss = _validation_loss(model, valid_pairs)
    stale = 0
    for epoch in range(max_epochs):
        for batch in _batches(pairs, config.batch_size, rng):
            with dc.Tape() as tape:
                loss = supervised_loss(model, batch)
            dc.backward(tape, loss)
            grads = dc.clip_grad_norm(_descent_grads(model, tape), config.clip_norm)
            dc.adam_step(model.params, grads, lr)
        val = _validation_loss(model, valid_pairs)
        if trace is not None:
            trace.append({"phase": f"pretrain-{name}", "step": epoch + 1,
                          "valid_loss": val})
        if val < best_loss - 1e-9:
            best_loss = val
            best = model.params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    model.params.load_values_from(best)
    return best_loss


def _validation_loss(model, pairs) -> float:
    return supervised_loss(model, pairs).item()


def evaluate_parser_accuracy(parser, pairs, config: TrainingConfig) -> float:
    hits = 0
    for src, gold in pairs:
        hyps = beam_search(parser, list(src), config.beam_size,
                           config.max_decode_len)
        if hyps and list(hyps[0].tokens) == list(gold):
            hits += 1
    return hits / len(pairs)


def evaluate_generator_bleu(generator, pairs, config: TrainingConfig) -> float:
    from ..harness.metrics import bleu4

    preds, golds = [], []
    for src, gold in pairs:
        hyps = beam_search(generator, list(src), config.beam_size,
                           config.max_decode_len)
        preds.append(list(hyps[0].tokens) if hyps else [])
        golds.append(list(gold))
    return bleu4(preds, golds)


@dataclass
class TrainedModels:
    parser: Seq2SeqModel
    generator: Seq2SeqModel
    p_lm: MarginalLM
    q_lm: MarginalLM
    trace: list = field(default_factory=list)
    pretrained_parser: Seq2SeqModel | None = None
    pretrained_generator: Seq2SeqModel | None = None


def pretrain_then_joint(corpus: Corpus, config: TrainingConfig,
                        joint: bool = True) -> TrainedModels:
    """Pretrain LMs and both sequence models, then run joint training.

    Joint training alternates per-batch model updates and stops when
    neither validation metric (parser exact match, generator BLEU-4)
    improves for `patience` consecutive evaluations; the best-validation
    snapshots of both models are restored.
    """
    if not corpus.train or not corpus.valid:
        raise ContractError("pretrain_then_joint: empty train or valid split")
    trace: list[dict] = []

    x_train = [list(ex.nl) for ex in corpus.train] + \
        [list(s) for s in corpus.unlabeled_x]
    y_train = [list(ex.mr) for ex in corpus.train] + \
        [list(s) for s in corpus.unlabeled_y]
    x_valid = [list(ex.nl) for ex in corpus.valid]
    y_valid = [list(ex.mr) for ex in corpus.valid]

    nl_vocab = build_vocab(x_train, min_count=config.nl_min_count)
    mr_vocab = build_vocab(y_train, min_count=config.mr_min_count)

    p_lm = MarginalLM(nl_vocab, config.lm_embed_dim, config.lm_hidden_dim,
                      substream(config.seed, "p-lm"))
    q_lm = MarginalLM(mr_vocab, config.lm_embed_dim, config.lm_hidden_dim,
                      substream(config.seed, "q-lm"))
    lm_pretrain(p_lm, x_train, x_valid, lr=config.lm_lr,
                max_epochs=config.max_lm_epochs, patience=config.patience,
                batch_size=config.batch_size, rng=substream(config.seed, "p-lm-epochs"))
    lm_pretrain(q_lm, y_train, y_valid, lr=config.lm_lr,
                max_epochs=config.max_lm_epochs, patience=config.patience,
                batch_size=config.batch_size, rng=substream(config.seed, "q-lm-epochs"))

    parser = Seq2SeqModel("nl->mr", nl_vocab, mr_vocab, config.embed_dim,
                          config.hidden_dim, substream(config.seed, "parser"))
    generator = Seq2SeqModel("mr->nl", mr_vocab, nl_vocab, config.embed_dim,
                             config.hidden_dim, substream(config.seed, "generator"))
    supervised_pretrain(parser, [(ex.nl, ex.mr) for ex in corpus.train],
                        [(ex.nl, ex.mr) for ex in corpus.valid], config,
                        trace=trace, name="parser")
    supervised_pretrain(generator, [(ex.mr, ex.nl) for ex in corpus.train],
                        [(ex.mr, ex.nl) for ex in corpus.valid], config,
                        trace=trace, name="generator")

    result = TrainedModels(parser=parser, generator=generator, p_lm=p_lm,
                           q_lm=q_lm, trace=trace)
    result.pretrained_parser = _snapshot(parser)
    result.pretrained_generator = _snapshot(generator)
    if not joint:
        return result

    parser_pairs = [(ex.nl, ex.mr) for ex in corpus.valid]
    generator_pairs = [(ex.mr, ex.nl) for ex in corpus.valid]
    baselines = {"e": BaselineState("e"), "d": BaselineState("d")}
    rng = substream(config.seed, "joint-epochs")
    unlab_rng = substream(config.seed, "joint-unlabeled")

    best_acc = evaluate_parser_accuracy(parser, parser_pairs, config)
    best_bleu = evaluate_generator_bleu(generator, generator_pairs, config)
    best_parser = parser.params.copy()
    best_generator = generator.params.copy()
    stale = 0
    step = 0
    n_batches = max(1, (len(corpus.train) + config.batch_size - 1)
                    // config.batch_size)
    ux_per_batch = len(corpus.unlabeled_x) // n_batches
    uy_per_batch = len(corpus.unlabeled_y) // n_batches

    for epoch in range(config.max_joint_epochs):
        ux = [corpus.unlabeled_x[i]
              for i in unlab_rng.permutation(len(corpus.unlabeled_x))]
        uy = [corpus.unlabeled_y[i]
              for i in unlab_rng.permutation(len(corpus.unlabeled_y))]
        for k, batch in enumerate(_batches(corpus.train, config.batch_size, rng)):
            step += 1
            losses = semidim_train_step(
                parser, generator, p_lm, q_lm, batch,
                ux[k * ux_per_batch:(k + 1) * ux_per_batch],
                uy[k * uy_per_batch:(k + 1) * uy_per_batch],
                config, baselines)
        acc = evaluate_parser_accuracy(parser, parser_pairs, config)
        bleu = evaluate_generator_bleu(generator, generator_pairs, config)
        trace.append({"phase": "joint", "step": step,
                      "sup_parser": losses["sup_parser"],
                      "sup_generator": losses["sup_generator"],
                      "bound_e": losses["bound_e"],
                      "bound_d": losses["bound_d"],
                      "baseline_e": baselines["e"].running_mean,
                      "baseline_d": baselines["d"].running_mean,
                      "valid_accuracy": acc, "valid_bleu4": bleu})
        improved = False
        if acc > best_acc + 1e-12:
            best_acc = acc
            best_parser = parser.params.copy()
            improved = True
        if bleu > best_bleu + 1e-12:
            best_bleu = bleu
            best_generator = generator.params.copy()
            improved = True
        stale = 0 if improved else stale + 1
        if stale >= config.patience:
            break

    parser.params.load_values_from(best_parser)
    generator.params.load_values_from(best_generator)
    return result


def _snapshot(model: Seq2SeqModel) -> Seq2SeqModel:
    clone = Seq2SeqModel(model.direction, model.src_vocab, model.tgt_vocab,
                         model.embed_dim, model.hidden_dim,
                         substream(0, "snapshot"))
    clone.params.load_values_from(model.params)
    return clone


def write_trace(trace, path: str):
    """Training trace as line-delimited JSON records."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec) + "\n")

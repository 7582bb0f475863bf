"""LSTM language models for the marginal distributions over NL and MR."""

from __future__ import annotations

import math

import numpy as np

from .. import diffcore as dc
from ..errors import ContractError
from ..rng import uniform_init
from .vocab import BOS_ID, EOS_ID, Vocabulary


class MarginalLM:
    """One-layer LSTM language model; frozen after pretraining."""

    def __init__(self, vocab: Vocabulary, embed_dim: int, hidden_dim: int, rng):
        self.vocab = vocab
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.frozen = False
        p = self.params = dc.ParameterStore()
        E, H, V = embed_dim, hidden_dim, len(vocab)
        p.add("embed", uniform_init(rng, E, (V, E)))
        p.add("W", uniform_init(rng, E, (E, 4 * H)))
        p.add("U", uniform_init(rng, H, (H, 4 * H)))
        b = np.zeros((1, 4 * H))
        b[0, H:2 * H] = 1.0
        p.add("b", b)
        p.add("out_W", uniform_init(rng, H, (H, V)))
        p.add("out_b", np.zeros((1, V)))

    def sequence_nll(self, tokens) -> dc.Tensor:
        """Negative log-probability of the sequence (EOS included), on tape."""
        p = self.params
        H = self.hidden_dim
        input_ids = [BOS_ID] + self.vocab.ids(tokens)
        gold_ids = self.vocab.ids(tokens) + [EOS_ID]
        emb = dc.embedding_lookup(p["embed"], input_ids)
        zx = dc.matmul(emb, p["W"])
        h = dc.Tensor(np.zeros((1, H)))
        c = dc.Tensor(np.zeros((1, H)))
        lps = []
        V = len(self.vocab)
        for t, gold in enumerate(gold_ids):
            h, c = dc.lstm_cell(None, h, c, p["W"], p["U"], p["b"],
                                zx_t=dc.slice_rows(zx, t, t + 1))
            logits = dc.add(dc.matmul(h, p["out_W"]), p["out_b"])
            logp = dc.log_softmax(logits)
            onehot = np.zeros((V, 1))
            onehot[gold, 0] = 1.0
            lps.append(dc.matmul(logp, dc.Tensor(onehot)))
        return dc.neg(dc.tsum(dc.concat(lps, axis=1)))

    def log_prob(self, tokens) -> float:
        return -self.sequence_nll(tokens).item()


def lm_log_prob(lm, tokens) -> float:
    return lm.log_prob(tokens)


def perplexity(lm: MarginalLM, split) -> float:
    total_nll = 0.0
    total_tokens = 0
    for seq in split:
        total_nll += lm.sequence_nll(seq).item()
        total_tokens += len(seq) + 1  # EOS step counts
    return math.exp(total_nll / total_tokens)


def lm_pretrain(lm: MarginalLM, train_split, valid_split, lr: float = 0.5,
                max_epochs: int = 50, patience: int = 5, clip_norm: float = 5.0,
                batch_size: int = 16, rng=None) -> list[float]:
    """SGD training with early stopping on validation perplexity.

    Returns the validation-perplexity trace; the model keeps its best
    checkpoint and is marked frozen.
    """
    if not train_split or not valid_split:
        raise ContractError("lm_pretrain: empty training or validation split")
    if lm.frozen:
        raise ContractError("lm_pretrain: model is frozen")
    rng = rng or np.random.default_rng(0)

    best = perplexity(lm, valid_split)
    best_params = lm.params.copy()
    trace = [best]
    stale = 0
    order = np.arange(len(train_split))
    for _ in range(max_epochs):
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            idxs = order[start:start + batch_size]
            with dc.Tape() as tape:
                nlls = [lm.sequence_nll(train_split[i]) for i in idxs]
                loss = dc.scale(dc.tsum(dc.concat(nlls, axis=1)), 1.0 / len(idxs))
            dc.backward(tape, loss)
            grads = dc.clip_grad_norm(lm.params.grads_from_tape(tape), clip_norm)
            dc.sgd_step(lm.params, grads, lr)
        ppl = perplexity(lm, valid_split)
        trace.append(ppl)
        if ppl < best:
            best = ppl
            best_params = lm.params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    lm.params.load_values_from(best_params)
    lm.frozen = True
    return trace

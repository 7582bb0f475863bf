"""Encoder-decoder model with attention and a copy gate.

One instance models a single direction: NL -> MR (the parser) or
MR -> NL (the generator).  The encoder is a 2-layer bidirectional LSTM,
the decoder a single LSTM layer whose output distribution mixes a
vocabulary softmax with attention-weighted copying from the source.
All sequences are lists of surface tokens; ids are internal.
"""

from __future__ import annotations

import numpy as np

from .. import diffcore as dc
from ..errors import ContractError
from ..rng import uniform_init
from .vocab import BOS_ID, EOS, EOS_ID, PAD, BOS, UNK, Vocabulary

PROB_FLOOR = 1e-300


class Seq2SeqModel:
    def __init__(self, direction: str, src_vocab: Vocabulary, tgt_vocab: Vocabulary,
                 embed_dim: int, hidden_dim: int, rng):
        self.direction = direction
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.frozen = False
        p = self.params = dc.ParameterStore()
        E, H = embed_dim, hidden_dim
        Vs, Vt = len(src_vocab), len(tgt_vocab)

        p.add("src_embed", uniform_init(rng, E, (Vs, E)))
        p.add("tgt_embed", uniform_init(rng, E, (Vt, E)))
        for layer, in_dim in ((0, E), (1, 2 * H)):
            for d in ("fwd", "bwd"):
                p.add(f"enc{layer}_{d}_W", uniform_init(rng, in_dim, (in_dim, 4 * H)))
                p.add(f"enc{layer}_{d}_U", uniform_init(rng, H, (H, 4 * H)))
                b = np.zeros((1, 4 * H))
                b[0, H:2 * H] = 1.0  # forget-gate bias
                p.add(f"enc{layer}_{d}_b", b)
        p.add("dec_init_W", uniform_init(rng, 2 * H, (2 * H, H)))
        p.add("dec_W", uniform_init(rng, E, (E, 4 * H)))
        p.add("dec_U", uniform_init(rng, H, (H, 4 * H)))
        db = np.zeros((1, 4 * H))
        db[0, H:2 * H] = 1.0
        p.add("dec_b", db)
        p.add("att_w", uniform_init(rng, 2 * H, (2 * H, H)))
        p.add("out_W2", uniform_init(rng, 3 * H, (3 * H, H)))
        p.add("out_W1", uniform_init(rng, H, (H, Vt)))
        p.add("gate_w", uniform_init(rng, 3 * H, (3 * H, 1)))
        p.add("gate_b", np.zeros((1, 1)))

    # -- encoder ---------------------------------------------------------

    def _run_direction(self, inputs: dc.Tensor, W, U, b, reverse: bool) -> dc.Tensor:
        """One LSTM pass over (len, in_dim) rows; returns (len, H) states."""
        H = self.hidden_dim
        n = inputs.shape[0]
        zx = dc.matmul(inputs, W)
        h = dc.Tensor(np.zeros((1, H)))
        c = dc.Tensor(np.zeros((1, H)))
        order = range(n - 1, -1, -1) if reverse else range(n)
        states: list = [None] * n
        for t in order:
            h, c = dc.lstm_cell(None, h, c, W, U, b, zx_t=dc.slice_rows(zx, t, t + 1))
            states[t] = h
        return dc.concat(states, axis=0)

    def encode(self, src_tokens) -> tuple[dc.Tensor, dc.Tensor, dc.Tensor]:
        """Per-position context matrix (len, 2H) plus the decoder start state."""
        if not src_tokens:
            raise ContractError("encode: empty source sequence")
        p = self.params
        ids = self.src_vocab.ids(src_tokens)
        emb = dc.embedding_lookup(p["src_embed"], ids)
        layer_in = emb
        for layer in (0, 1):
            fwd = self._run_direction(layer_in, p[f"enc{layer}_fwd_W"],
                                      p[f"enc{layer}_fwd_U"], p[f"enc{layer}_fwd_b"], False)
            bwd = self._run_direction(layer_in, p[f"enc{layer}_bwd_W"],
                                      p[f"enc{layer}_bwd_U"], p[f"enc{layer}_bwd_b"], True)
            layer_in = dc.concat([fwd, bwd], axis=1)
        H_src = layer_in
        n = H_src.shape[0]
        final = dc.concat([dc.slice_rows(fwd, n - 1, n), dc.slice_rows(bwd, 0, 1)], axis=1)
        h0 = dc.tanh(dc.matmul(final, p["dec_init_W"]))
        c0 = dc.Tensor(np.zeros((1, self.hidden_dim)))
        return H_src, h0, c0

    # -- decoder ---------------------------------------------------------

    def attention_scores_precompute(self, H_src: dc.Tensor) -> dc.Tensor:
        """Source-side attention keys, shared across decode steps."""
        return dc.transpose(dc.matmul(H_src, self.params["att_w"]))  # (H, len)

    def decode_step(self, prev_id: int, h, c, H_src, enc_scores):
        """Advance the decoder one step.

        Returns (h, c, alpha, p_vocab, gate) where alpha is (1, len),
        p_vocab is (1, V_tgt) and gate is the scalar vocabulary weight.
        """
        p = self.params
        emb = dc.embedding_lookup(p["tgt_embed"], [prev_id])
        h, c = dc.lstm_cell(emb, h, c, p["dec_W"], p["dec_U"], p["dec_b"])
        alpha = dc.softmax(dc.matmul(h, enc_scores))
        c_t = dc.matmul(alpha, H_src)
        sc = dc.concat([h, c_t], axis=1)
        p_vocab = dc.softmax(dc.matmul(dc.tanh(dc.matmul(sc, p["out_W2"])), p["out_W1"]))
        gate = dc.sigmoid(dc.add(dc.matmul(sc, p["gate_w"]), p["gate_b"]))
        return h, c, alpha, p_vocab, gate

    def step_token_prob(self, alpha, p_vocab, gate, src_tokens, token: str) -> dc.Tensor:
        """Copy-augmented probability of emitting `token` at this step."""
        Vt = len(self.tgt_vocab)
        parts = []
        if token in self.tgt_vocab:
            onehot = np.zeros((Vt, 1))
            onehot[self.tgt_vocab.id(token), 0] = 1.0
            parts.append(dc.mul(gate, dc.matmul(p_vocab, dc.Tensor(onehot))))
        mask = np.array([[1.0] if t == token else [0.0] for t in src_tokens])
        if mask.any():
            inv_gate = dc.add_const(dc.neg(gate), 1.0)
            parts.append(dc.mul(inv_gate, dc.matmul(alpha, dc.Tensor(mask))))
        if not parts:
            return dc.Tensor(0.0)
        return parts[0] if len(parts) == 1 else dc.add(parts[0], parts[1])

    def sequence_log_prob(self, src_tokens, tgt_tokens) -> dc.Tensor:
        """Teacher-forced log q(target | source), EOS included."""
        H_src, h, c = self.encode(src_tokens)
        enc_scores = self.attention_scores_precompute(H_src)
        input_ids = [BOS_ID] + self.tgt_vocab.ids(tgt_tokens)
        golds = list(tgt_tokens) + [EOS]
        lps = []
        for prev_id, gold in zip(input_ids, golds):
            h, c, alpha, p_vocab, gate = self.decode_step(prev_id, h, c, H_src, enc_scores)
            prob = self.step_token_prob(alpha, p_vocab, gate, src_tokens, gold)
            lps.append(dc.log(dc.add_const(prob, PROB_FLOOR)))
        return dc.tsum(dc.concat(lps, axis=1))


def decode_step_distribution(model: Seq2SeqModel, alpha, p_vocab, gate,
                             src_tokens) -> np.ndarray:
    """Full output distribution over vocabulary entries then source positions."""
    g = gate.data[0, 0]
    return np.concatenate([g * p_vocab.data[0], (1.0 - g) * alpha.data[0]])


def surface_distribution(model: Seq2SeqModel, dist: np.ndarray, src_tokens) -> dict[str, float]:
    """Aggregate vocabulary and copy mass per surface token."""
    Vt = len(model.tgt_vocab)
    out: dict[str, float] = {}
    for idx in range(Vt):
        tok = model.tgt_vocab.token(idx)
        if dist[idx] > 0.0:
            out[tok] = out.get(tok, 0.0) + dist[idx]
    for pos, tok in enumerate(src_tokens):
        mass = dist[Vt + pos]
        if mass > 0.0:
            out[tok] = out.get(tok, 0.0) + mass
    return out


def sequence_log_prob(model: Seq2SeqModel, src_tokens, tgt_tokens) -> dc.Tensor:
    return model.sequence_log_prob(src_tokens, tgt_tokens)


def supervised_loss(model: Seq2SeqModel, batch) -> dc.Tensor:
    """Negative mean sequence log-likelihood over (source, target) pairs."""
    if not batch:
        raise ContractError("supervised_loss: empty batch")
    lps = [model.sequence_log_prob(src, tgt) for src, tgt in batch]
    total = dc.tsum(dc.concat(lps, axis=1))
    return dc.scale(dc.neg(total), 1.0 / len(batch))
